use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{dot, MODULE};
use crate::divergence::Generator;
use crate::error::{Error, Result};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallKind {
    /// `{x : D_F(x || c) <= r}`, whose boundary is a lifted hyperplane section.
    First,
    /// `{x : D_F(c || x) <= r}`.
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
    pub kind: BallKind,
}

impl Ball {
    pub fn first(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius, kind: BallKind::First }
    }

    pub fn second(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius, kind: BallKind::Second }
    }

    pub fn contains(&self, gen: &Generator, x: &[f64]) -> Result<bool> {
        let d = match self.kind {
            BallKind::First => gen.divergence(x, &self.center)?,
            BallKind::Second => gen.divergence(&self.center, x)?,
        };
        Ok(d <= self.radius)
    }
}

/// A second-type ball described through the conjugate: `x` belongs to it
/// exactly when `grad F(x)` lies in the first-type `F*`-ball around
/// `grad F(c)` with the same radius.
#[derive(Debug, Clone)]
pub struct DualBall {
    pub dual: Generator,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl DualBall {
    pub fn contains(&self, gen: &Generator, x: &[f64]) -> Result<bool> {
        let y = gen.gradient(x)?;
        Ok(self.dual.divergence(&y, &self.center)? <= self.radius)
    }
}

pub fn second_ball_via_dual(gen: &Generator, ball: &Ball) -> Result<DualBall> {
    if ball.kind != BallKind::Second {
        return Err(Error::invalid(MODULE, "second_ball_via_dual expects a second-type ball"));
    }
    Ok(DualBall { dual: gen.dual()?, center: gen.gradient(&ball.center)?, radius: ball.radius })
}

/// An axis-aligned box `[lo, hi]` in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl ProbeBox {
    fn contains(&self, x: &[f64]) -> bool {
        (0..2).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }
}

/// Inner and outer Euclidean radii `(r_in, r_out)` of a planar first-type
/// ball, scanned over evenly spaced directions.
///
/// Fails with a domain error when the ball reaches the probe box boundary.
pub fn euclidean_sandwich(gen: &Generator, ball: &Ball, probe: &ProbeBox) -> Result<(f64, f64)> {
    if gen.dim() != 2 || ball.kind != BallKind::First {
        return Err(Error::unsupported(MODULE, "euclidean_sandwich needs a planar first-type ball"));
    }
    let c = &ball.center;
    if !probe.contains(c) {
        return Err(Error::invalid(MODULE, "ball center outside the probe box"));
    }
    let (mut r_in, mut r_out) = (f64::INFINITY, 0.0f64);
    for k in 0..tol::SANDWICH_DIRECTIONS {
        let th = std::f64::consts::TAU * k as f64 / tol::SANDWICH_DIRECTIONS as f64;
        let u = [th.cos(), th.sin()];
        let mut t_max = f64::INFINITY;
        for i in 0..2 {
            if u[i] > 1e-15 {
                t_max = t_max.min((probe.hi[i] - c[i]) / u[i]);
            } else if u[i] < -1e-15 {
                t_max = t_max.min((probe.lo[i] - c[i]) / u[i]);
            }
        }
        let at = |t: f64| gen.divergence(&[c[0] + t * u[0], c[1] + t * u[1]], c);
        if at(t_max)? < ball.radius {
            return Err(Error::Domain { generator: gen.name().to_string(), point: vec![c[0] + t_max * u[0], c[1] + t_max * u[1]] });
        }
        let (mut a, mut b) = (0.0, t_max);
        while b - a > tol::SANDWICH_BISECTION {
            let m = 0.5 * (a + b);
            if at(m)? < ball.radius {
                a = m;
            } else {
                b = m;
            }
        }
        let t = 0.5 * (a + b);
        r_in = r_in.min(t);
        r_out = r_out.max(t);
    }
    Ok((r_in, r_out))
}

/// Smallest and largest Hessian eigenvalues over an `n x n` grid of the box.
pub fn hessian_extremes(gen: &Generator, probe: &ProbeBox, n: usize) -> Result<(f64, f64)> {
    let n = n.max(2);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            let x = [
                probe.lo[0] + (probe.hi[0] - probe.lo[0]) * i as f64 / (n - 1) as f64,
                probe.lo[1] + (probe.hi[1] - probe.lo[1]) * j as f64 / (n - 1) as f64,
            ];
            let eig = SymmetricEigen::new(gen.hessian(&x)?).eigenvalues;
            lo = lo.min(eig.min());
            hi = hi.max(eig.max());
        }
    }
    Ok((lo, hi))
}

/// `(gamma_in, gamma_out) = (2 / eta_max, 2 / eta_min)` for Hessian
/// eigenvalue bounds; a first-type ball of radius `r` then satisfies
/// `r_in^2 >= gamma_in r` and `r_out^2 <= gamma_out r`.
pub fn fatness_constants(eta_min: f64, eta_max: f64) -> (f64, f64) {
    (2.0 / eta_max, 2.0 / eta_min)
}

/// The smallest first-type enclosing ball `min_c max_i D_F(p_i || c)`.
#[derive(Debug, Clone)]
pub struct EnclosingBall {
    pub ball: Ball,
    /// Convex weights of the points; the center is their weighted mean.
    pub weights: Vec<f64>,
    /// Duality gap `max_i D(p_i||c) - sum_i w_i D(p_i||c)`; zero at the optimum.
    pub gap: f64,
}

/// Minimizes `max_i D_F(p_i || c)`.
///
/// The dual problem maximizes the Jensen gap `sum w_i F(p_i) - F(sum w_i p_i)`
/// over the simplex; at the optimum `c = sum w_i p_i` and every point with
/// positive weight lies on the boundary. A multiplicative-weights pass finds
/// the active set, then Newton solves the optimality system on it exactly.
pub fn smallest_enclosing_ball(gen: &Generator, points: &[Vec<f64>]) -> Result<EnclosingBall> {
    if points.is_empty() {
        return Err(Error::invalid(MODULE, "smallest_enclosing_ball needs at least one point"));
    }
    for p in points {
        gen.value(p)?;
    }
    let n = points.len();
    let d = gen.dim();
    let center_of = |w: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; d];
        for (wi, p) in w.iter().zip(points) {
            c.iter_mut().zip(p).for_each(|(c, v)| *c += wi * v);
        }
        c
    };
    let divs = |c: &[f64]| points.iter().map(|p| gen.divergence(p, c)).collect::<Result<Vec<f64>>>();

    let mut w = vec![1.0 / n as f64; n];
    for it in 0..400 {
        let dv = divs(&center_of(&w))?;
        let top = dv.iter().cloned().fold(0.0, f64::max);
        if top == 0.0 {
            break;
        }
        let eta = 8.0 / (1.0 + it as f64).sqrt();
        w.iter_mut().zip(&dv).for_each(|(w, v)| *w *= (eta * (v / top - 1.0)).exp());
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|w| *w /= s);
    }

    let warm = center_of(&w);
    let dv = divs(&warm)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dv[b].total_cmp(&dv[a]).then(a.cmp(&b)));
    let pool: Vec<usize> = if n <= 12 { order.clone() } else { order[..(d + 3).min(n)].to_vec() };

    let mut best: Option<EnclosingBall> = None;
    for size in 1..=(d + 1).min(pool.len()) {
        for subset in combinations(&pool, size) {
            if let Some(sol) = solve_active(gen, points, &subset, &w) {
                best = Some(sol);
                break;
            }
        }
        if best.is_some() {
            break;
        }
    }
    if let Some(b) = best {
        return Ok(b);
    }
    let top = dv.iter().cloned().fold(0.0, f64::max);
    let avg: f64 = w.iter().zip(&dv).map(|(w, v)| w * v).sum();
    Ok(EnclosingBall { ball: Ball::first(warm, top), weights: w, gap: top - avg })
}

fn combinations(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| pool[i]).collect());
        let mut i = k;
        while i > 0 && idx[i - 1] == pool.len() - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Newton on `D(p_a || c) = t` for active `a`, `sum w_a = 1`, `c = sum w_a p_a`.
/// Returns the ball when the solution has non-negative weights and encloses every point.
fn solve_active(gen: &Generator, points: &[Vec<f64>], active: &[usize], warm: &[f64]) -> Option<EnclosingBall> {
    let m = active.len();
    let d = gen.dim();
    let mut w: Vec<f64> = active.iter().map(|&i| warm[i].max(1e-3)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    let center = |w: &[f64]| -> Vec<f64> {
        let mut c = vec![0.0; d];
        for (wi, &i) in w.iter().zip(active) {
            c.iter_mut().zip(&points[i]).for_each(|(c, v)| *c += wi * v);
        }
        c
    };
    let mut c = center(&w);
    if !gen.contains(&c) {
        return None;
    }
    let mut t = active.iter().map(|&i| gen.divergence(&points[i], &c).unwrap_or(0.0)).sum::<f64>() / m as f64;
    for _ in 0..60 {
        let dv: Vec<f64> = active.iter().map(|&i| gen.divergence(&points[i], &c)).collect::<Result<_>>().ok()?;
        let mut res = DVector::zeros(m + 1);
        for a in 0..m {
            res[a] = dv[a] - t;
        }
        res[m] = w.iter().sum::<f64>() - 1.0;
        let scale = 1.0 + t.abs();
        if res.amax() <= 1e-14 * scale {
            break;
        }
        let h = gen.hessian(&c).ok()?;
        let mut jac = DMatrix::zeros(m + 1, m + 1);
        for a in 0..m {
            let diff = DVector::from_iterator(d, points[active[a]].iter().zip(&c).map(|(p, c)| p - c));
            let hd = &h * diff;
            for b in 0..m {
                jac[(a, b)] = -dot(hd.as_slice(), &points[active[b]]);
            }
            jac[(a, m)] = -1.0;
        }
        for b in 0..m {
            jac[(m, b)] = 1.0;
        }
        let step = jac.lu().solve(&res)?;
        let mut lambda = 1.0;
        loop {
            let nw: Vec<f64> = w.iter().zip(step.iter()).map(|(w, s)| w - lambda * s).collect();
            let nc = center(&nw);
            if gen.contains(&nc) {
                w = nw;
                c = nc;
                t -= lambda * step[m];
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return None;
            }
        }
    }
    if w.iter().any(|&v| v < -1e-12) {
        return None;
    }
    let all = points.iter().map(|p| gen.divergence(p, &c)).collect::<Result<Vec<f64>>>().ok()?;
    let top = all.iter().cloned().fold(0.0, f64::max);
    if top > t * (1.0 + 1e-9) + 1e-14 {
        return None;
    }
    let mut weights = vec![0.0; points.len()];
    for (wi, &i) in w.iter().zip(active) {
        weights[i] = wi.max(0.0);
    }
    let avg: f64 = weights.iter().zip(&all).map(|(w, v)| w * v).sum();
    Some(EnclosingBall { ball: Ball::first(c, top), weights, gap: (top - avg).max(0.0) })
}
