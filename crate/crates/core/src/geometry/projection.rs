use super::{dot, norm, Hyperplane, MODULE};
use crate::divergence::{Constraint, Generator};
use crate::error::{Error, Result};
use crate::tol;

#[derive(Debug, Clone)]
pub struct Projection {
    pub point: Vec<f64>,
    pub divergence: f64,
    /// `|x - P_W(x - grad)|` at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

/// Feasible set: the halfspaces `h(x) <= 0` intersected with the generator's
/// domain, pulled inward by a small margin so iterates stay strictly inside.
struct Feasible {
    halfspaces: Vec<Hyperplane>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Feasible {
    fn new(gen: &Generator, polytope: &[Hyperplane]) -> Result<Self> {
        let d = gen.dim();
        let dom = gen.domain();
        let mut halfspaces = polytope.to_vec();
        for h in &halfspaces {
            if h.normal.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: h.normal.len() });
            }
        }
        let margin = |v: f64| if v.is_finite() { 1e-9 * (1.0 + v.abs()) } else { 0.0 };
        for c in dom.constraints() {
            match c {
                Constraint::SimplexInterior => {
                    halfspaces.push(Hyperplane { normal: vec![1.0; d], offset: -1.0 + 1e-9 });
                }
                Constraint::AboveParabola { .. } => {
                    return Err(Error::unsupported(MODULE, "projection on a non-polyhedral domain"));
                }
            }
        }
        let (lo, hi) = (0..d)
            .map(|i| {
                let (l, h) = dom.interval(i);
                (l + margin(l), h - margin(h))
            })
            .unzip();
        Ok(Self { halfspaces, lo, hi })
    }

    fn clamp(&self, x: &mut [f64]) {
        for i in 0..x.len() {
            x[i] = x[i].clamp(self.lo[i], self.hi[i]);
        }
    }

    /// Euclidean projection by Dykstra's alternating scheme.
    fn project(&self, z: &[f64]) -> Option<Vec<f64>> {
        let d = z.len();
        let sets = self.halfspaces.len() + 1;
        let mut incr = vec![vec![0.0; d]; sets];
        let mut x = z.to_vec();
        for _ in 0..20_000 {
            let prev = x.clone();
            for (k, inc) in incr.iter_mut().enumerate() {
                let y: Vec<f64> = x.iter().zip(inc.iter()).map(|(a, b)| a + b).collect();
                let mut nx = y.clone();
                if k == 0 {
                    self.clamp(&mut nx);
                } else {
                    let h = &self.halfspaces[k - 1];
                    let v = h.eval(&y);
                    if v > 0.0 {
                        let nn = dot(&h.normal, &h.normal);
                        nx.iter_mut().zip(&h.normal).for_each(|(x, n)| *x -= v / nn * n);
                    }
                }
                inc.iter_mut().zip(y.iter().zip(&nx)).for_each(|(i, (y, n))| *i = y - n);
                x = nx;
            }
            let moved: f64 = x.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if moved <= 1e-15 * (1.0 + norm(&x)) {
                break;
            }
        }
        let scale = 1.0 + norm(&x);
        let slack = 1e-9 * scale;
        let in_box = x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= l - slack && *v <= h + slack);
        self.clamp(&mut x);
        let feasible = in_box && self.halfspaces.iter().all(|h| h.eval(&x) <= slack * (1.0 + norm(&h.normal)));
        feasible.then_some(x)
    }
}

/// `argmin_{x in W} D_F(x || p)` for a polytope `W` given as halfspaces
/// `h(x) <= 0`, by projected gradient descent with Armijo backtracking.
pub fn bregman_project(gen: &Generator, p: &[f64], polytope: &[Hyperplane]) -> Result<Projection> {
    let gp = gen.gradient(p)?;
    let feasible = Feasible::new(gen, polytope)?;
    let mut x = feasible.project(p).ok_or(Error::EmptyFeasibleSet)?;
    if !gen.contains(&x) {
        return Err(Error::EmptyFeasibleSet);
    }
    let objective = |x: &[f64]| gen.divergence(x, p);
    let grad = |x: &[f64]| -> Result<Vec<f64>> {
        Ok(gen.gradient(x)?.iter().zip(&gp).map(|(a, b)| a - b).collect())
    };
    let mut fx = objective(&x)?;
    let mut step = 1.0;
    let mut residual = f64::INFINITY;
    for it in 0..tol::PROJECTION_MAX_ITER {
        let g = grad(&x)?;
        let probe: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b).collect();
        let px = feasible.project(&probe).ok_or(Error::EmptyFeasibleSet)?;
        residual = x.iter().zip(&px).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if residual <= tol::PROJECTION {
            return Ok(Projection { point: x, divergence: fx, residual, iterations: it });
        }
        loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let cand = feasible.project(&trial).ok_or(Error::EmptyFeasibleSet)?;
            let dx: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
            let bound = fx + dot(&g, &dx) + dot(&dx, &dx) / (2.0 * step);
            if gen.contains(&cand) {
                let fc = objective(&cand)?;
                if fc <= bound + 1e-15 * (1.0 + fx.abs()) {
                    x = cand;
                    fx = fc;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-30 {
                return Err(Error::Convergence { module: MODULE, message: "projection line search stalled".into() });
            }
        }
        step *= 2.0;
    }
    Err(Error::Convergence { module: MODULE, message: format!("projection residual {residual:e} after cap") })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn halfplane(n: [f64; 2], c: f64) -> Hyperplane {
        Hyperplane { normal: n.to_vec(), offset: c }
    }

    #[test]
    fn euclidean_projection_on_a_halfplane() {
        let g = Generator::squared_half_norm(2);
        let proj = bregman_project(&g, &[2.0, 1.0], &[halfplane([1.0, 0.0], -1.0)]).unwrap();
        assert_relative_eq!(proj.point[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(proj.point[1], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn interior_point_projects_to_itself() {
        let g = Generator::shannon(2);
        let proj = bregman_project(&g, &[0.5, 0.5], &[halfplane([1.0, 1.0], -2.0)]).unwrap();
        assert_relative_eq!(proj.divergence, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn kl_projection_on_simplex_face_normalizes() {
        // Projecting onto {x1 + x2 = 1} under generalized KL rescales the point.
        let g = Generator::shannon(2);
        let w = [halfplane([1.0, 1.0], -1.0), halfplane([-1.0, -1.0], 1.0)];
        let proj = bregman_project(&g, &[0.6, 1.8], &w).unwrap();
        assert_relative_eq!(proj.point[0], 0.25, epsilon = 1e-5);
        assert_relative_eq!(proj.point[1], 0.75, epsilon = 1e-5);
    }

    #[test]
    fn empty_polytope_is_reported() {
        let g = Generator::shannon(2);
        let w = [halfplane([1.0, 0.0], 1.0)];
        assert!(matches!(bregman_project(&g, &[1.0, 1.0], &w), Err(Error::EmptyFeasibleSet)));
    }
}
