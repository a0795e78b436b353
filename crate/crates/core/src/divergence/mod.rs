//! Convex generators and the Bregman divergences they induce.
//!
//! A [`Generator`] is a strictly convex, differentiable function `F` on an
//! open convex [`Domain`]. It induces
//!
//! ```text
//! D_F(p || q) = F(p) - F(q) - <grad F(q), p - q>
//! ```
//!
//! which is non-negative, zero exactly when `p == q`, convex in `p`, and in
//! general not symmetric. Every generator also exposes its gradient, the
//! inverse of the gradient and its Legendre conjugate `F*`, which satisfies
//! `D_F(p || q) = D_F*(grad F(q) || grad F(p))`.
//!
//! | name                | F(x) per coordinate          | domain   |
//! |---------------------|------------------------------|----------|
//! | `squared_norm`      | `x^2`                        | R        |
//! | `squared_half_norm` | `x^2 / 2`                    | R        |
//! | `norm_like:a`       | `x^a`, integer `a >= 2`      | (0, inf) |
//! | `shannon`           | `x log x - x`                | (0, inf) |
//! | `exponential`       | `e^x`                        | R        |
//! | `burg`              | `-log x`                     | (0, inf) |
//! | `bit_entropy`       | `x log x + (1-x) log(1-x)`   | (0, 1)   |
//! | `dual_bit_entropy`  | `log(1 + e^x)`               | R        |
//! | `hellinger_like`    | `-sqrt(1 - x^2)`             | (-1, 1)  |
//! | `mahalanobis`       | `x^T Q x`, `Q` SPD           | R^d      |
//!
//! New generators are built with [`Generator::separable`],
//! [`Generator::linear_combination`] and [`Generator::with_affine_term`].
//! Inverse gradients are closed-form where possible and fall back to a
//! safeguarded Newton iteration otherwise.

mod domain;
mod scalar;

pub use domain::{Constraint, Domain};

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tol;
use scalar::Scalar;

/// Names accepted by [`Generator::by_name`].
pub const BUILTIN_NAMES: [&str; 10] = [
    "squared_norm",
    "squared_half_norm",
    "norm_like",
    "shannon",
    "exponential",
    "burg",
    "bit_entropy",
    "dual_bit_entropy",
    "hellinger_like",
    "mahalanobis",
];

/// A strictly convex differentiable function on an open convex domain.
///
/// Cloning is cheap; the representation is shared.
#[derive(Clone)]
pub struct Generator(Arc<Inner>);

struct Inner {
    name: String,
    domain: Domain,
    kind: Kind,
    gradient_domain: OnceLock<Result<Domain>>,
}

enum Kind {
    Separable(Vec<Scalar>),
    /// `x^T q x`.
    Quadratic { q: DMatrix<f64>, q_inv: DMatrix<f64> },
    Product(Vec<Generator>),
    Combination { terms: Vec<(f64, Generator)>, coords: Option<Vec<CoordFn>> },
    Affine { base: Generator, a: Vec<f64>, b: f64 },
    Conjugate(Generator),
    /// Log-normalizer of the univariate normal in natural coordinates.
    NormalCumulant,
    /// Conjugate of `NormalCumulant`, the negative differential entropy.
    NormalEntropy,
}

/// One coordinate of a coordinate-separable generator: the partial
/// derivative is `shift + sum(w * s.d1(x_i))`.
#[derive(Clone, Debug)]
struct CoordFn {
    terms: Vec<(f64, Scalar)>,
    shift: f64,
}

impl CoordFn {
    fn d1(&self, t: f64) -> f64 {
        self.shift + self.terms.iter().map(|(w, s)| w * s.d1(t)).sum::<f64>()
    }

    fn d2(&self, t: f64) -> f64 {
        self.terms.iter().map(|(w, s)| w * s.d2(t)).sum()
    }

    fn d1_limit(&self, t: f64) -> f64 {
        self.shift + self.terms.iter().map(|(w, s)| w * s.d1_limit(t)).sum::<f64>()
    }
}

impl fmt::Debug for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Generator({}, dim={})", self.name(), self.dim())
    }
}

const MODULE: &str = "divergence";

fn dual_name(name: &str) -> String {
    match name {
        "shannon" => "exponential".into(),
        "exponential" => "shannon".into(),
        "squared_half_norm" => "squared_half_norm".into(),
        n => match n.strip_prefix("dual_") {
            Some(rest) => rest.to_string(),
            None => format!("dual_{n}"),
        },
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Generator {
    fn new(name: impl Into<String>, domain: Domain, kind: Kind) -> Self {
        Generator(Arc::new(Inner { name: name.into(), domain, kind, gradient_domain: OnceLock::new() }))
    }

    fn from_scalar(name: &str, s: Scalar, dim: usize) -> Self {
        let iv = s.interval();
        let domain = Domain::from_intervals(&vec![iv; dim.max(1)]).expect("scalar interval is non-empty");
        Self::new(name, domain, Kind::Separable(vec![s; dim.max(1)]))
    }

    /// `|x|^2`, gradient `2x`.
    pub fn squared_norm(dim: usize) -> Self {
        Self::from_scalar("squared_norm", Scalar::Quad(1.0), dim)
    }

    /// `|x|^2 / 2`; self-conjugate, its divergence is half the squared Euclidean distance.
    pub fn squared_half_norm(dim: usize) -> Self {
        Self::from_scalar("squared_half_norm", Scalar::Quad(0.5), dim)
    }

    /// `sum x_i^alpha` on the positive orthant, for an integer `alpha >= 2`.
    pub fn norm_like(alpha: u32, dim: usize) -> Result<Self> {
        if alpha < 2 {
            return Err(Error::invalid(MODULE, format!("norm_like needs an integer exponent >= 2, got {alpha}")));
        }
        Ok(Self::from_scalar(&format!("norm_like:{alpha}"), Scalar::NormLike(alpha), dim))
    }

    /// Unnormalized negative Shannon entropy; its divergence is the generalized KL divergence.
    pub fn shannon(dim: usize) -> Self {
        Self::from_scalar("shannon", Scalar::Shannon, dim)
    }

    pub fn exponential(dim: usize) -> Self {
        Self::from_scalar("exponential", Scalar::Exponential, dim)
    }

    /// Burg entropy; its divergence is the Itakura-Saito divergence.
    pub fn burg(dim: usize) -> Self {
        Self::from_scalar("burg", Scalar::Burg, dim)
    }

    /// Negative binary entropy on the open unit cube.
    pub fn bit_entropy(dim: usize) -> Self {
        Self::from_scalar("bit_entropy", Scalar::BitEntropy, dim)
    }

    pub fn dual_bit_entropy(dim: usize) -> Self {
        Self::from_scalar("dual_bit_entropy", Scalar::DualBitEntropy, dim)
    }

    pub fn hellinger_like(dim: usize) -> Self {
        Self::from_scalar("hellinger_like", Scalar::Hellinger, dim)
    }

    /// `x^T Q x` for a symmetric positive definite `Q`.
    pub fn mahalanobis(q: DMatrix<f64>) -> Result<Self> {
        let d = q.nrows();
        if d == 0 || q.ncols() != d {
            return Err(Error::invalid(MODULE, "mahalanobis matrix must be square and non-empty"));
        }
        let scale = q.amax();
        if (0..d).any(|i| (0..d).any(|j| (q[(i, j)] - q[(j, i)]).abs() > 1e-12 * scale)) {
            return Err(Error::invalid(MODULE, "mahalanobis matrix must be symmetric"));
        }
        let chol = q
            .clone()
            .cholesky()
            .ok_or_else(|| Error::invalid(MODULE, "mahalanobis matrix must be positive definite"))?;
        let q_inv = chol.inverse();
        Ok(Self::new("mahalanobis", Domain::all_space(d), Kind::Quadratic { q, q_inv }))
    }

    /// Builds a built-in generator from its name.
    ///
    /// `norm_like:<alpha>` selects the exponent (default 3) and
    /// `mahalanobis:<q11,q12,...>` supplies a row-major `dim x dim` matrix
    /// (default identity).
    pub fn by_name(spec: &str, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid(MODULE, "dimension must be >= 1"));
        }
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (spec.trim(), None),
        };
        let no_arg = |g: Generator| match arg {
            None => Ok(g),
            Some(_) => Err(Error::invalid(MODULE, format!("generator `{name}` takes no parameter"))),
        };
        match name {
            "squared_norm" => no_arg(Self::squared_norm(dim)),
            "squared_half_norm" => no_arg(Self::squared_half_norm(dim)),
            "shannon" => no_arg(Self::shannon(dim)),
            "exponential" => no_arg(Self::exponential(dim)),
            "burg" => no_arg(Self::burg(dim)),
            "bit_entropy" => no_arg(Self::bit_entropy(dim)),
            "dual_bit_entropy" => no_arg(Self::dual_bit_entropy(dim)),
            "hellinger_like" => no_arg(Self::hellinger_like(dim)),
            "norm_like" => {
                let alpha = match arg {
                    None => 3,
                    Some(a) => a
                        .parse::<u32>()
                        .map_err(|_| Error::invalid(MODULE, format!("norm_like exponent `{a}` is not an integer >= 2")))?,
                };
                Self::norm_like(alpha, dim)
            }
            "mahalanobis" => {
                let q = match arg {
                    None => DMatrix::identity(dim, dim),
                    Some(a) => {
                        let vals = a
                            .split(',')
                            .map(|v| v.trim().parse::<f64>())
                            .collect::<std::result::Result<Vec<_>, _>>()
                            .map_err(|_| Error::invalid(MODULE, format!("cannot parse mahalanobis matrix `{a}`")))?;
                        if vals.len() != dim * dim {
                            return Err(Error::invalid(
                                MODULE,
                                format!("mahalanobis matrix needs {} entries, got {}", dim * dim, vals.len()),
                            ));
                        }
                        DMatrix::from_row_slice(dim, dim, &vals)
                    }
                };
                Self::mahalanobis(q)
            }
            other => Err(Error::invalid(MODULE, format!("unknown generator `{other}`"))),
        }
    }

    /// Log-normalizer of the univariate normal in natural coordinates
    /// `(mu / sigma^2, -1 / (2 sigma^2))`.
    pub(crate) fn normal_cumulant() -> Self {
        let domain = Domain::from_intervals(&[(f64::NEG_INFINITY, f64::INFINITY), (f64::NEG_INFINITY, -tol::NORMAL_THETA2)])
            .expect("valid interval");
        Self::new("normal_cumulant", domain, Kind::NormalCumulant)
    }

    fn normal_entropy() -> Self {
        let domain = Domain::all_space(2).with_constraint(Constraint::AboveParabola { base: 0, upper: 1 });
        Self::new("dual_normal_cumulant", domain, Kind::NormalEntropy)
    }

    /// `F(x) = sum_i F_i(x_i)` over blocks of coordinates.
    pub fn separable(factors: &[Generator]) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::invalid(MODULE, "separable generator needs at least one factor"));
        }
        let domain = Domain::concat(&factors.iter().map(|f| f.domain().clone()).collect::<Vec<_>>())?;
        let name = format!("separable({})", factors.iter().map(|f| f.name()).collect::<Vec<_>>().join(","));
        let scalars: Option<Vec<Scalar>> = factors
            .iter()
            .map(|f| match &f.0.kind {
                Kind::Separable(s) => Some(s.clone()),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(|v| v.concat());
        let kind = match scalars {
            Some(s) => Kind::Separable(s),
            None => Kind::Product(factors.to_vec()),
        };
        Ok(Self::new(name, domain, kind))
    }

    /// `F(x) = sum_k w_k F_k(x)` for positive weights, on the intersection of domains.
    pub fn linear_combination(terms: &[(f64, Generator)]) -> Result<Self> {
        let Some((_, first)) = terms.first() else {
            return Err(Error::invalid(MODULE, "linear combination needs at least one term"));
        };
        let dim = first.dim();
        let mut domain = first.domain().clone();
        for (w, g) in terms {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::invalid(MODULE, format!("combination weights must be positive, got {w}")));
            }
            if g.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: g.dim() });
            }
            domain = domain.intersect(g.domain())?;
        }
        let coords = terms
            .iter()
            .map(|(w, g)| g.coordinate_fns().map(|c| (w, c)))
            .collect::<Option<Vec<_>>>()
            .map(|parts| {
                (0..dim)
                    .map(|i| {
                        let mut out = CoordFn { terms: Vec::new(), shift: 0.0 };
                        for (w, c) in &parts {
                            out.shift += *w * c[i].shift;
                            out.terms.extend(c[i].terms.iter().map(|(v, s)| (*w * v, *s)));
                        }
                        out
                    })
                    .collect()
            });
        let name = terms.iter().map(|(w, g)| format!("{w}*{}", g.name())).collect::<Vec<_>>().join("+");
        Ok(Self::new(name, domain, Kind::Combination { terms: terms.to_vec(), coords }))
    }

    /// `F(x) + <a, x> + b`; the divergence is unchanged.
    pub fn with_affine_term(&self, a: &[f64], b: f64) -> Result<Self> {
        if a.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: a.len() });
        }
        if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(MODULE, "affine term must be finite"));
        }
        Ok(Self::new(
            format!("{}+affine", self.name()),
            self.domain().clone(),
            Kind::Affine { base: self.clone(), a: a.to_vec(), b },
        ))
    }

    /// The Legendre conjugate `F*`, defined on the image of `grad F`.
    pub fn dual(&self) -> Result<Self> {
        let name = dual_name(self.name());
        Ok(match &self.0.kind {
            Kind::Separable(s) => {
                let s: Vec<Scalar> = s.iter().map(|s| s.dual()).collect();
                Self::new(name, self.gradient_domain()?, Kind::Separable(s))
            }
            Kind::Quadratic { q, q_inv } => Self::new(
                name,
                Domain::all_space(self.dim()),
                Kind::Quadratic { q: q_inv * 0.25, q_inv: q * 4.0 },
            ),
            Kind::Product(fs) => {
                let duals = fs.iter().map(|f| f.dual()).collect::<Result<Vec<_>>>()?;
                Self::new(name, self.gradient_domain()?, Kind::Product(duals))
            }
            Kind::Conjugate(g) => g.clone(),
            Kind::NormalCumulant => Self::normal_entropy(),
            Kind::NormalEntropy => Self::normal_cumulant(),
            _ => Self::new(name, self.gradient_domain()?, Kind::Conjugate(self.clone())),
        })
    }

    pub fn name(&self) -> &str {
        &self.0.name
    }

    pub fn dim(&self) -> usize {
        self.0.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.0.domain
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.0.domain.contains(x)
    }

    /// True when the Hessian is constant, so `grad F` maps segments to segments.
    pub fn has_affine_gradient(&self) -> bool {
        match &self.0.kind {
            Kind::Separable(s) => s.iter().all(|s| matches!(s, Scalar::Quad(_))),
            Kind::Quadratic { .. } => true,
            Kind::Product(fs) => fs.iter().all(|f| f.has_affine_gradient()),
            Kind::Combination { terms, .. } => terms.iter().all(|(_, g)| g.has_affine_gradient()),
            Kind::Affine { base, .. } | Kind::Conjugate(base) => base.has_affine_gradient(),
            Kind::NormalCumulant | Kind::NormalEntropy => false,
        }
    }

    /// True when `grad F` acts coordinatewise, so it maps boxes onto boxes.
    pub fn is_coordinate_separable(&self) -> bool {
        self.coordinate_fns().is_some()
            || matches!(&self.0.kind, Kind::Conjugate(g) if g.is_coordinate_separable())
    }

    fn coordinate_fns(&self) -> Option<Vec<CoordFn>> {
        match &self.0.kind {
            Kind::Separable(s) => Some(s.iter().map(|s| CoordFn { terms: vec![(1.0, *s)], shift: 0.0 }).collect()),
            Kind::Product(fs) => fs.iter().map(|f| f.coordinate_fns()).collect::<Option<Vec<_>>>().map(|v| v.concat()),
            Kind::Affine { base, a, .. } => base.coordinate_fns().map(|mut c| {
                c.iter_mut().zip(a).for_each(|(c, a)| c.shift += a);
                c
            }),
            Kind::Combination { coords, .. } => coords.clone(),
            Kind::Quadratic { q, .. } => {
                let d = q.nrows();
                let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || q[(i, j)] == 0.0));
                diagonal.then(|| (0..d).map(|i| CoordFn { terms: vec![(1.0, Scalar::Quad(q[(i, i)]))], shift: 0.0 }).collect())
            }
            _ => None,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if !self.contains(x) {
            return Err(Error::Domain { generator: self.name().to_string(), point: x.to_vec() });
        }
        Ok(())
    }

    /// `F(x)`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let v = self.f_unchecked(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::non_finite(MODULE, format!("{}({x:?}) = {v}", self.name())))
        }
    }

    /// `grad F(x)`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut g = vec![0.0; x.len()];
        self.grad_unchecked(x, &mut g);
        if g.iter().all(|v| v.is_finite()) {
            Ok(g)
        } else {
            Err(Error::non_finite(MODULE, format!("gradient of {} at {x:?}", self.name())))
        }
    }

    /// `(grad F)^-1(y)`, the unique `x` in the domain with `grad F(x) = y`.
    pub fn inverse_gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: y.len() });
        }
        if let Ok(image) = self.gradient_domain() {
            if !image.contains(y) {
                return Err(Error::Domain { generator: dual_name(self.name()), point: y.to_vec() });
            }
        }
        let mut x = vec![0.0; y.len()];
        self.inv_grad_raw(y, &mut x)?;
        if !self.contains(&x) {
            return Err(Error::Domain { generator: self.name().to_string(), point: x });
        }
        Ok(x)
    }

    /// The Hessian of `F` at `x`.
    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let h = self.hess_unchecked(x);
        if h.iter().all(|v| v.is_finite()) {
            Ok(h)
        } else {
            Err(Error::non_finite(MODULE, format!("hessian of {} at {x:?}", self.name())))
        }
    }

    /// The image of `grad F`, which is the domain of the conjugate.
    pub fn gradient_domain(&self) -> Result<Domain> {
        self.0.gradient_domain.get_or_init(|| self.compute_gradient_domain()).clone()
    }

    fn compute_gradient_domain(&self) -> Result<Domain> {
        let unsupported = || Error::unsupported(MODULE, format!("gradient image of `{}`", self.name()));
        match &self.0.kind {
            Kind::Separable(s) => Domain::from_intervals(&s.iter().map(|s| s.image()).collect::<Vec<_>>()),
            Kind::Quadratic { .. } => Ok(Domain::all_space(self.dim())),
            Kind::Product(fs) => Domain::concat(&fs.iter().map(|f| f.gradient_domain()).collect::<Result<Vec<_>>>()?),
            Kind::Affine { base, a, .. } => base.gradient_domain()?.translated(a),
            Kind::Conjugate(g) => Ok(g.domain().clone()),
            Kind::NormalCumulant => Ok(Self::normal_entropy().domain().clone()),
            Kind::NormalEntropy => Ok(Self::normal_cumulant().domain().clone()),
            Kind::Combination { terms, coords } => {
                let dom = self.domain();
                if let (Some(coords), true) = (coords, dom.is_box()) {
                    let iv: Vec<(f64, f64)> = coords
                        .iter()
                        .enumerate()
                        .map(|(i, c)| {
                            let (lo, hi) = dom.interval(i);
                            (c.d1_limit(lo), c.d1_limit(hi))
                        })
                        .collect();
                    return Domain::from_intervals(&iv);
                }
                let everywhere = terms.iter().all(|(_, g)| *g.domain() == Domain::all_space(self.dim()));
                let coercive = terms.iter().any(|(_, g)| matches!(g.0.kind, Kind::Quadratic { .. }));
                if everywhere && coercive {
                    Ok(Domain::all_space(self.dim()))
                } else {
                    Err(unsupported())
                }
            }
        }
    }

    /// `F*(y) = <x, y> - F(x)` with `x = (grad F)^-1(y)`.
    pub fn conjugate_value(&self, y: &[f64]) -> Result<f64> {
        let x = self.inverse_gradient(y)?;
        let v = dot(&x, y) - self.f_unchecked(&x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::non_finite(MODULE, format!("conjugate of {} at {y:?}", self.name())))
        }
    }

    /// `D_F(p || q)`.
    pub fn divergence(&self, p: &[f64], q: &[f64]) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        let mut gq = vec![0.0; q.len()];
        self.grad_unchecked(q, &mut gq);
        clamp_divergence(self.f_unchecked(p), self.f_unchecked(q), &gq, p, q)
    }

    pub(crate) fn f_unchecked(&self, x: &[f64]) -> f64 {
        match &self.0.kind {
            Kind::Separable(s) => s.iter().zip(x).map(|(s, &v)| s.f(v)).sum(),
            Kind::Quadratic { q, .. } => {
                let v = DVector::from_column_slice(x);
                (v.transpose() * q * &v)[(0, 0)]
            }
            Kind::Product(fs) => {
                let mut off = 0;
                fs.iter()
                    .map(|f| {
                        let d = f.dim();
                        off += d;
                        f.f_unchecked(&x[off - d..off])
                    })
                    .sum()
            }
            Kind::Combination { terms, .. } => terms.iter().map(|(w, g)| w * g.f_unchecked(x)).sum(),
            Kind::Affine { base, a, b } => base.f_unchecked(x) + dot(a, x) + b,
            Kind::Conjugate(g) => {
                let mut xp = vec![0.0; x.len()];
                match g.inv_grad_raw(x, &mut xp) {
                    Ok(()) => dot(&xp, x) - g.f_unchecked(&xp),
                    Err(_) => f64::NAN,
                }
            }
            Kind::NormalCumulant => {
                let (t1, t2) = (x[0], x[1]);
                -t1 * t1 / (4.0 * t2) + 0.5 * (-std::f64::consts::PI / t2).ln()
            }
            Kind::NormalEntropy => {
                let s = x[1] - x[0] * x[0];
                -0.5 - 0.5 * (2.0 * std::f64::consts::PI * s).ln()
            }
        }
    }

    pub(crate) fn grad_unchecked(&self, x: &[f64], out: &mut [f64]) {
        match &self.0.kind {
            Kind::Separable(s) => s.iter().zip(x).zip(out.iter_mut()).for_each(|((s, &v), o)| *o = s.d1(v)),
            Kind::Quadratic { q, .. } => {
                let g = q * DVector::from_column_slice(x) * 2.0;
                out.copy_from_slice(g.as_slice());
            }
            Kind::Product(fs) => {
                let mut off = 0;
                for f in fs {
                    let d = f.dim();
                    f.grad_unchecked(&x[off..off + d], &mut out[off..off + d]);
                    off += d;
                }
            }
            Kind::Combination { terms, coords } => {
                if let Some(c) = coords {
                    c.iter().zip(x).zip(out.iter_mut()).for_each(|((c, &v), o)| *o = c.d1(v));
                } else {
                    out.iter_mut().for_each(|o| *o = 0.0);
                    let mut tmp = vec![0.0; x.len()];
                    for (w, g) in terms {
                        g.grad_unchecked(x, &mut tmp);
                        out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += w * t);
                    }
                }
            }
            Kind::Affine { base, a, .. } => {
                base.grad_unchecked(x, out);
                out.iter_mut().zip(a).for_each(|(o, a)| *o += a);
            }
            Kind::Conjugate(g) => {
                if g.inv_grad_raw(x, out).is_err() {
                    out.iter_mut().for_each(|o| *o = f64::NAN);
                }
            }
            Kind::NormalCumulant => {
                let (t1, t2) = (x[0], x[1]);
                out[0] = -t1 / (2.0 * t2);
                out[1] = t1 * t1 / (4.0 * t2 * t2) - 0.5 / t2;
            }
            Kind::NormalEntropy => {
                let s = x[1] - x[0] * x[0];
                out[0] = x[0] / s;
                out[1] = -0.5 / s;
            }
        }
    }

    pub(crate) fn hess_unchecked(&self, x: &[f64]) -> DMatrix<f64> {
        let d = x.len();
        match &self.0.kind {
            Kind::Separable(s) => DMatrix::from_diagonal(&DVector::from_iterator(d, s.iter().zip(x).map(|(s, &v)| s.d2(v)))),
            Kind::Quadratic { q, .. } => q * 2.0,
            Kind::Product(fs) => {
                let mut h = DMatrix::zeros(d, d);
                let mut off = 0;
                for f in fs {
                    let k = f.dim();
                    h.view_mut((off, off), (k, k)).copy_from(&f.hess_unchecked(&x[off..off + k]));
                    off += k;
                }
                h
            }
            Kind::Combination { terms, .. } => {
                terms.iter().fold(DMatrix::zeros(d, d), |acc, (w, g)| acc + g.hess_unchecked(x) * *w)
            }
            Kind::Affine { base, .. } => base.hess_unchecked(x),
            Kind::Conjugate(g) => {
                let mut xp = vec![0.0; d];
                if g.inv_grad_raw(x, &mut xp).is_err() {
                    return DMatrix::from_element(d, d, f64::NAN);
                }
                g.hess_unchecked(&xp).try_inverse().unwrap_or_else(|| DMatrix::from_element(d, d, f64::NAN))
            }
            Kind::NormalCumulant => {
                let (t1, t2) = (x[0], x[1]);
                let h12 = t1 / (2.0 * t2 * t2);
                let h22 = -t1 * t1 / (2.0 * t2 * t2 * t2) + 0.5 / (t2 * t2);
                DMatrix::from_row_slice(2, 2, &[-0.5 / t2, h12, h12, h22])
            }
            Kind::NormalEntropy => {
                let s = x[1] - x[0] * x[0];
                let h11 = 1.0 / s + 2.0 * x[0] * x[0] / (s * s);
                let h12 = -x[0] / (s * s);
                DMatrix::from_row_slice(2, 2, &[h11, h12, h12, 0.5 / (s * s)])
            }
        }
    }

    fn inv_grad_raw(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.0.kind {
            Kind::Separable(s) => {
                s.iter().zip(y).zip(out.iter_mut()).for_each(|((s, &v), o)| *o = s.inv_d1(v));
            }
            Kind::Quadratic { q_inv, .. } => {
                let x = q_inv * DVector::from_column_slice(y) * 0.5;
                out.copy_from_slice(x.as_slice());
            }
            Kind::Product(fs) => {
                let mut off = 0;
                for f in fs {
                    let d = f.dim();
                    f.inv_grad_raw(&y[off..off + d], &mut out[off..off + d])?;
                    off += d;
                }
            }
            Kind::Combination { coords: Some(c), .. } => {
                let dom = self.domain();
                for (i, c) in c.iter().enumerate() {
                    let (lo, hi) = dom.interval(i);
                    out[i] = solve_monotone(c, y[i], lo, hi).ok_or_else(|| Error::Convergence {
                        module: MODULE,
                        message: format!("inverse gradient of {} at {y:?}", self.name()),
                    })?;
                }
            }
            Kind::Combination { coords: None, .. } => {
                let x = self.newton_inverse(y)?;
                out.copy_from_slice(&x);
            }
            Kind::Affine { base, a, .. } => {
                let shifted: Vec<f64> = y.iter().zip(a).map(|(y, a)| y - a).collect();
                base.inv_grad_raw(&shifted, out)?;
            }
            Kind::Conjugate(g) => g.grad_unchecked(y, out),
            Kind::NormalCumulant => Self::normal_entropy().grad_unchecked(y, out),
            Kind::NormalEntropy => Self::normal_cumulant().grad_unchecked(y, out),
        }
        if out.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::non_finite(MODULE, format!("inverse gradient of {} at {y:?}", self.name())))
        }
    }

    /// Damped Newton on the strictly convex `F(x) - <y, x>`, kept inside the domain.
    fn newton_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let d = y.len();
        let target = tol::INV_GRAD * (1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max));
        let phi = |x: &[f64]| self.f_unchecked(x) - dot(x, y);
        let residual = |x: &[f64]| {
            let mut g = vec![0.0; d];
            self.grad_unchecked(x, &mut g);
            g.iter_mut().zip(y).for_each(|(g, y)| *g -= y);
            g
        };
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let mut x = self.domain().interior_point();
        let mut g = residual(&x);
        for _ in 0..500 {
            if norm(&g) <= target {
                return Ok(x);
            }
            let h = self.hess_unchecked(&x);
            let step = h
                .lu()
                .solve(&DVector::from_column_slice(&g))
                .ok_or_else(|| Error::non_finite(MODULE, "singular hessian in inverse gradient"))?;
            let slope = -dot(step.as_slice(), &g);
            let f0 = phi(&x);
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-20 {
                let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(x, s)| x - t * s).collect();
                if self.contains(&cand) {
                    let gc = residual(&cand);
                    let fc = phi(&cand);
                    if fc <= f0 + 1e-4 * t * slope || norm(&gc) < (1.0 - 1e-4 * t) * norm(&g) {
                        x = cand;
                        g = gc;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if norm(&g) <= target.max(1e-9 * (1.0 + norm(y))) {
            Ok(x)
        } else {
            Err(Error::Convergence { module: MODULE, message: format!("inverse gradient of {} at {y:?}", self.name()) })
        }
    }
}

/// Safeguarded Newton-bisection for `c.d1(t) = y` on the open interval `(lo, hi)`.
fn solve_monotone(c: &CoordFn, y: f64, lo: f64, hi: f64) -> Option<f64> {
    let g = |t: f64| c.d1(t) - y;
    let start = match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + 1.0,
        (false, true) => hi - 1.0,
        (false, false) => 0.0,
    };
    let (mut a, mut b) = (lo, hi);
    let g0 = g(start);
    if g0 == 0.0 {
        return Some(start);
    }
    // Finite bracket [a, b] with g(a) < 0 < g(b); infinite ends are expanded.
    if g0 < 0.0 {
        a = start;
        if !hi.is_finite() {
            let mut step = 1.0;
            loop {
                let t = start + step;
                if g(t) >= 0.0 {
                    b = t;
                    break;
                }
                a = t;
                step *= 2.0;
                if step > 1e300 {
                    return None;
                }
            }
        }
    } else {
        b = start;
        if !lo.is_finite() {
            let mut step = 1.0;
            loop {
                let t = start - step;
                if g(t) <= 0.0 {
                    a = t;
                    break;
                }
                b = t;
                step *= 2.0;
                if step > 1e300 {
                    return None;
                }
            }
        }
    }
    let target = tol::INV_GRAD * (1.0 + y.abs());
    let mut t = 0.5 * (a + b);
    for _ in 0..400 {
        let v = g(t);
        if v.abs() <= target {
            return Some(t);
        }
        if v < 0.0 {
            a = t;
        } else {
            b = t;
        }
        let newton = t - v / c.d2(t);
        t = if newton > a && newton < b && newton.is_finite() { newton } else { 0.5 * (a + b) };
        if b - a <= 4.0 * f64::EPSILON * (1.0 + t.abs()) {
            return Some(t);
        }
    }
    Some(t)
}

/// Assembles `F(p) - F(q) - <gq, p - q>`, clamping cancellation noise to zero.
pub(crate) fn clamp_divergence(fp: f64, fq: f64, gq: &[f64], p: &[f64], q: &[f64]) -> Result<f64> {
    let lin: f64 = gq.iter().zip(p.iter().zip(q)).map(|(g, (a, b))| g * (a - b)).sum();
    let raw = fp - fq - lin;
    if !raw.is_finite() {
        return Err(Error::non_finite(MODULE, format!("divergence between {p:?} and {q:?}")));
    }
    if raw >= 0.0 {
        return Ok(raw);
    }
    let scale = 1.0 + fp.abs() + fq.abs() + lin.abs();
    if raw >= -tol::NUM_CLAMP * scale {
        Ok(0.0)
    } else {
        Err(Error::non_finite(MODULE, format!("negative divergence {raw} between {p:?} and {q:?}")))
    }
}

/// `D_F(p || q)`.
pub fn divergence(gen: &Generator, p: &[f64], q: &[f64]) -> Result<f64> {
    gen.divergence(p, q)
}

/// `(D_F(p || q) + D_F(q || p)) / 2 = <p - q, grad F(p) - grad F(q)> / 2`.
pub fn symmetrized_divergence(gen: &Generator, p: &[f64], q: &[f64]) -> Result<f64> {
    let gp = gen.gradient(p)?;
    let gq = gen.gradient(q)?;
    let s: f64 = p.iter().zip(q).zip(gp.iter().zip(&gq)).map(|((a, b), (ga, gb))| (a - b) * (ga - gb)).sum();
    Ok(0.5 * s.max(0.0))
}

/// Residual and scale of the three-point identity
/// `D(p||q) + D(q||r) = D(p||r) + <p - q, grad F(r) - grad F(q)>`.
pub fn three_point_residual(gen: &Generator, p: &[f64], q: &[f64], r: &[f64]) -> Result<(f64, f64)> {
    let dpq = gen.divergence(p, q)?;
    let dqr = gen.divergence(q, r)?;
    let dpr = gen.divergence(p, r)?;
    let gq = gen.gradient(q)?;
    let gr = gen.gradient(r)?;
    let cross: f64 = p.iter().zip(q).zip(gr.iter().zip(&gq)).map(|((a, b), (c, d))| (a - b) * (c - d)).sum();
    let residual = (dpq + dqr - dpr - cross).abs();
    let scale = 1.0 + dpq.abs() + dqr.abs() + dpr.abs() + cross.abs();
    Ok((residual, scale))
}
