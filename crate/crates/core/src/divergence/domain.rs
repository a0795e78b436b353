use crate::error::{Error, Result};
use crate::tol::DOMAIN_MARGIN;

/// A non-box constraint layered on top of the coordinate intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint {
    /// `sum(x) < 1`; together with positive coordinates this is the open simplex.
    SimplexInterior,
    /// `x[upper] > x[base]^2`.
    AboveParabola { base: usize, upper: usize },
}

/// An open convex set: a product of open intervals, optionally cut by
/// extra constraints. Membership is strict with margin [`DOMAIN_MARGIN`].
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lo: Vec<f64>,
    hi: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl Domain {
    pub fn from_intervals(intervals: &[(f64, f64)]) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::invalid("divergence", "domain must have dimension >= 1"));
        }
        if intervals.iter().any(|&(l, h)| l.is_nan() || h.is_nan() || l >= h) {
            return Err(Error::EmptyDomain);
        }
        Ok(Self {
            lo: intervals.iter().map(|i| i.0).collect(),
            hi: intervals.iter().map(|i| i.1).collect(),
            constraints: Vec::new(),
        })
    }

    fn uniform(dim: usize, lo: f64, hi: f64) -> Self {
        Self { lo: vec![lo; dim], hi: vec![hi; dim], constraints: Vec::new() }
    }

    pub fn all_space(dim: usize) -> Self {
        Self::uniform(dim, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn positive_orthant(dim: usize) -> Self {
        Self::uniform(dim, 0.0, f64::INFINITY)
    }

    pub fn unit_cube(dim: usize) -> Self {
        Self::uniform(dim, 0.0, 1.0)
    }

    pub fn simplex_interior(dim: usize) -> Self {
        let mut d = Self::uniform(dim, 0.0, 1.0);
        d.constraints.push(Constraint::SimplexInterior);
        d
    }

    pub(crate) fn with_constraint(mut self, c: Constraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.lo[i], self.hi[i])
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn is_box(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let in_box = x
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&l, &h))| v.is_finite() && v - l > DOMAIN_MARGIN && h - v > DOMAIN_MARGIN);
        in_box
            && self.constraints.iter().all(|c| match *c {
                Constraint::SimplexInterior => 1.0 - x.iter().sum::<f64>() > DOMAIN_MARGIN,
                Constraint::AboveParabola { base, upper } => x[upper] - x[base] * x[base] > DOMAIN_MARGIN,
            })
    }

    pub fn intersect(&self, other: &Domain) -> Result<Domain> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).any(|(l, h)| l >= h) {
            return Err(Error::EmptyDomain);
        }
        let mut constraints = self.constraints.clone();
        for c in &other.constraints {
            if !constraints.contains(c) {
                constraints.push(*c);
            }
        }
        let d = Domain { lo, hi, constraints };
        if !d.contains(&d.interior_point()) {
            return Err(Error::EmptyDomain);
        }
        Ok(d)
    }

    /// A deterministic point well inside the domain, used to start iterations.
    pub fn interior_point(&self) -> Vec<f64> {
        let mut x: Vec<f64> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| match (l.is_finite(), h.is_finite()) {
                (true, true) => 0.5 * (l + h),
                (true, false) => l + 1.0,
                (false, true) => h - 1.0,
                (false, false) => 0.0,
            })
            .collect();
        for c in &self.constraints {
            match *c {
                Constraint::SimplexInterior => {
                    let d = x.len() as f64;
                    x.iter_mut().for_each(|v| *v = 1.0 / (d + 1.0));
                }
                Constraint::AboveParabola { base, upper } => {
                    x[upper] = x[upper].max(x[base] * x[base] + 1.0);
                }
            }
        }
        x
    }

    /// Shift every interval by `a`; fails for non-box domains.
    pub(crate) fn translated(&self, a: &[f64]) -> Result<Domain> {
        if !self.is_box() {
            return Err(Error::unsupported("divergence", "translating a non-box domain"));
        }
        Ok(Domain {
            lo: self.lo.iter().zip(a).map(|(l, s)| l + s).collect(),
            hi: self.hi.iter().zip(a).map(|(h, s)| h + s).collect(),
            constraints: Vec::new(),
        })
    }

    pub(crate) fn concat(parts: &[Domain]) -> Result<Domain> {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        for p in parts {
            if !p.is_box() {
                return Err(Error::unsupported("divergence", "product of non-box domains"));
            }
            lo.extend_from_slice(&p.lo);
            hi.extend_from_slice(&p.hi);
        }
        Ok(Domain { lo, hi, constraints: Vec::new() })
    }
}
