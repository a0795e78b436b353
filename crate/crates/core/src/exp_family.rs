//! Exponential families in natural coordinates. The KL divergence between
//! two members is the Bregman divergence of the log-normalizer `F` with the
//! arguments swapped: `KL(p || q) = D_F(theta_q || theta_p)`.

use serde::{Deserialize, Serialize};

use crate::divergence::Generator;
use crate::error::{Error, Result};

const MODULE: &str = "exp_family";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// `F = log(1 + e^theta)`, source parameter `q` in (0, 1).
    Bernoulli,
    /// `F = e^theta`, source parameter `lambda > 0`.
    Poisson,
    /// `F = -theta_1^2 / (4 theta_2) + log(-pi / theta_2) / 2`, source `(mu, sigma2)`.
    Normal,
    /// `F = -log theta`: the one-sided law `theta e^(-theta x)` on `x >= 0`,
    /// not the two-sided Laplace distribution. Source parameter is the rate.
    Laplacian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalParam(pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationParam(pub Vec<f64>);

#[derive(Debug, Clone)]
pub struct ExponentialFamily {
    kind: FamilyKind,
    cumulant: Generator,
}

pub const FAMILY_NAMES: [&str; 4] = ["bernoulli", "poisson", "normal", "laplacian"];

impl ExponentialFamily {
    pub fn new(kind: FamilyKind) -> Self {
        let cumulant = match kind {
            FamilyKind::Bernoulli => Generator::dual_bit_entropy(1),
            FamilyKind::Poisson => Generator::exponential(1),
            FamilyKind::Normal => Generator::normal_cumulant(),
            FamilyKind::Laplacian => Generator::burg(1),
        };
        Self { kind, cumulant }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        let kind = match name.to_ascii_lowercase().as_str() {
            "bernoulli" => FamilyKind::Bernoulli,
            "poisson" => FamilyKind::Poisson,
            "normal" | "gaussian" => FamilyKind::Normal,
            "laplacian" => FamilyKind::Laplacian,
            other => {
                return Err(Error::invalid(MODULE, format!("unknown family `{other}`; expected one of {}", FAMILY_NAMES.join(", "))))
            }
        };
        Ok(Self::new(kind))
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            FamilyKind::Bernoulli => "bernoulli",
            FamilyKind::Poisson => "poisson",
            FamilyKind::Normal => "normal",
            FamilyKind::Laplacian => "laplacian",
        }
    }

    /// Dimension of the natural parameter.
    pub fn order(&self) -> usize {
        self.cumulant.dim()
    }

    /// The log-normalizer `F` over the natural parameter space.
    pub fn cumulant(&self) -> &Generator {
        &self.cumulant
    }

    /// Names of the source parameters, in order.
    pub fn source_names(&self) -> &'static [&'static str] {
        match self.kind {
            FamilyKind::Bernoulli => &["q"],
            FamilyKind::Poisson => &["lambda"],
            FamilyKind::Normal => &["mu", "sigma2"],
            FamilyKind::Laplacian => &["rate"],
        }
    }

    fn check_source(&self, s: &[f64]) -> Result<()> {
        let names = self.source_names();
        if s.len() != names.len() {
            return Err(Error::DimensionMismatch { expected: names.len(), got: s.len() });
        }
        let ok = match self.kind {
            FamilyKind::Bernoulli => s[0] > 0.0 && s[0] < 1.0,
            FamilyKind::Poisson | FamilyKind::Laplacian => s[0] > 0.0 && s[0].is_finite(),
            FamilyKind::Normal => s[0].is_finite() && s[1] > 0.0 && s[1].is_finite(),
        };
        if !ok {
            return Err(Error::invalid(MODULE, format!("{} parameters {s:?} are out of range", self.name())));
        }
        Ok(())
    }

    fn check_natural(&self, theta: &NaturalParam) -> Result<()> {
        if theta.0.len() != self.order() {
            return Err(Error::DimensionMismatch { expected: self.order(), got: theta.0.len() });
        }
        if !self.cumulant.contains(&theta.0) {
            return Err(Error::NaturalSpace { family: self.name().to_string(), theta: theta.0.clone() });
        }
        Ok(())
    }

    pub fn natural_from_source(&self, s: &[f64]) -> Result<NaturalParam> {
        self.check_source(s)?;
        let theta = match self.kind {
            FamilyKind::Bernoulli => vec![(s[0] / (1.0 - s[0])).ln()],
            FamilyKind::Poisson => vec![s[0].ln()],
            FamilyKind::Normal => vec![s[0] / s[1], -0.5 / s[1]],
            FamilyKind::Laplacian => vec![s[0]],
        };
        let theta = NaturalParam(theta);
        self.check_natural(&theta)?;
        Ok(theta)
    }

    pub fn source_from_natural(&self, theta: &NaturalParam) -> Result<Vec<f64>> {
        self.check_natural(theta)?;
        let t = &theta.0;
        Ok(match self.kind {
            FamilyKind::Bernoulli => vec![1.0 / (1.0 + (-t[0]).exp())],
            FamilyKind::Poisson => vec![t[0].exp()],
            FamilyKind::Normal => {
                let s2 = -0.5 / t[1];
                vec![t[0] * s2, s2]
            }
            FamilyKind::Laplacian => vec![t[0]],
        })
    }

    /// Textbook KL between two members given by source parameters; computed
    /// without the cumulant so it can serve as an independent check.
    pub fn closed_form_kl_source(&self, p: &[f64], q: &[f64]) -> Result<f64> {
        self.check_source(p)?;
        self.check_source(q)?;
        Ok(match self.kind {
            FamilyKind::Bernoulli => {
                let (a, b) = (p[0], q[0]);
                a * (a / b).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln()
            }
            FamilyKind::Poisson => p[0] * (p[0] / q[0]).ln() - p[0] + q[0],
            FamilyKind::Normal => {
                let (mp, vp, mq, vq) = (p[0], p[1], q[0], q[1]);
                0.5 * (vq / vp).ln() + (vp + (mp - mq).powi(2)) / (2.0 * vq) - 0.5
            }
            FamilyKind::Laplacian => (p[0] / q[0]).ln() + q[0] / p[0] - 1.0,
        })
    }

    /// Textbook KL between two members given by natural parameters.
    pub fn closed_form_kl(&self, theta_p: &NaturalParam, theta_q: &NaturalParam) -> Result<f64> {
        let p = self.source_from_natural(theta_p)?;
        let q = self.source_from_natural(theta_q)?;
        self.closed_form_kl_source(&p, &q)
    }
}

/// `KL(p || q) = D_F(theta_q || theta_p)`.
pub fn kl_divergence(fam: &ExponentialFamily, theta_p: &NaturalParam, theta_q: &NaturalParam) -> Result<f64> {
    fam.check_natural(theta_p)?;
    fam.check_natural(theta_q)?;
    fam.cumulant.divergence(&theta_q.0, &theta_p.0)
}

/// `mu = grad F(theta)`.
pub fn to_expectation(fam: &ExponentialFamily, theta: &NaturalParam) -> Result<ExpectationParam> {
    fam.check_natural(theta)?;
    Ok(ExpectationParam(fam.cumulant.gradient(&theta.0)?))
}

/// `theta = grad F*(mu)`, the inverse of `to_expectation`.
pub fn to_natural(fam: &ExponentialFamily, mu: &ExpectationParam) -> Result<NaturalParam> {
    if mu.0.len() != fam.order() {
        return Err(Error::DimensionMismatch { expected: fam.order(), got: mu.0.len() });
    }
    let theta = fam.cumulant.inverse_gradient(&mu.0).map_err(|e| match e {
        Error::Domain { .. } => Error::Domain { generator: format!("{} expectation", fam.name()), point: mu.0.clone() },
        other => other,
    })?;
    Ok(NaturalParam(theta))
}
