//! Bisectors, lifted spheres, the in-sphere predicate, power balls,
//! geodesics, Bregman projections and ball geometry.
//!
//! The lifting map sends `x` to `(x, F(x))` on the graph of the generator.
//! Non-vertical hyperplanes `z = <a, x> + b` cut the graph in the boundary of
//! a first-type Bregman ball: the ball centered at `(grad F)^-1(a)` with
//! radius `<a, c> - F(c) + b`. Everything in this module follows from that
//! correspondence.

mod ball;
mod geodesic;
mod projection;

pub use ball::{
    euclidean_sandwich, fatness_constants, hessian_extremes, second_ball_via_dual, smallest_enclosing_ball, Ball,
    BallKind, DualBall, EnclosingBall, ProbeBox,
};
pub use geodesic::{geodesic_length, geodesic_point, GeodesicKind};
pub use projection::{bregman_project, Projection};

use nalgebra::{DMatrix, DVector};

use crate::divergence::Generator;
use crate::error::{Error, Result};
use crate::tol;

const MODULE: &str = "geom_core";

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// The affine function `x -> <normal, x> + offset`; its zero set is a hyperplane.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Hyperplane {
    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) + self.offset
    }
}

/// `(x, F(x))`.
pub fn lift(gen: &Generator, x: &[f64]) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    out.push(gen.value(x)?);
    Ok(out)
}

/// Tangent hyperplane to the lifted graph at `q`, as a function of `(x, z)`
/// with the `z` coefficient fixed to `-1`. It is positive exactly where the
/// lifted point lies below the tangent.
pub fn tangent_hyperplane(gen: &Generator, q: &[f64]) -> Result<Hyperplane> {
    let fq = gen.value(q)?;
    let mut normal = gen.gradient(q)?;
    let offset = fq - dot(q, &normal);
    normal.push(-1.0);
    Ok(Hyperplane { normal, offset })
}

/// First-type bisector of `p` and `q`, evaluating to `D_F(x||p) - D_F(x||q)`.
///
/// It is affine in `x`, negative on `p`'s side (`-D_F(p||q)` at `p`) and
/// positive on `q`'s side (`D_F(q||p)` at `q`).
pub fn bisector_first_type(gen: &Generator, p: &[f64], q: &[f64]) -> Result<Hyperplane> {
    let gp = gen.gradient(p)?;
    let gq = gen.gradient(q)?;
    let normal = gq.iter().zip(&gp).map(|(a, b)| a - b).collect();
    let offset = (dot(p, &gp) - gen.value(p)?) - (dot(q, &gq) - gen.value(q)?);
    Ok(Hyperplane { normal, offset })
}

/// Second-type bisector of `p` and `q` in gradient coordinates `y = grad F(x)`,
/// evaluating to `D_F(p||x) - D_F(q||x) = <y, q - p> + F(p) - F(q)`.
pub fn bisector_second_type(gen: &Generator, p: &[f64], q: &[f64]) -> Result<Hyperplane> {
    let normal = q.iter().zip(p).map(|(a, b)| a - b).collect();
    let offset = gen.value(p)? - gen.value(q)?;
    Ok(Hyperplane { normal, offset })
}

/// The power ball `(center, radius^2)` of a site: `center = grad F(p)` and
/// `radius^2 = <p', p'> + 2 (F(p) - <p, p'>)`. The squared radius may be negative.
///
/// `|x - center|^2 - radius^2 = 2 D_F(x||p) + |x|^2 - 2 F(x)`, so comparing
/// power distances compares divergences.
pub fn power_ball(gen: &Generator, p: &[f64]) -> Result<(Vec<f64>, f64)> {
    let g = gen.gradient(p)?;
    let r2 = dot(&g, &g) + 2.0 * (gen.value(p)? - dot(p, &g));
    Ok((g, r2))
}

pub fn power_distance(center: &[f64], radius_sq: f64, x: &[f64]) -> f64 {
    center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum::<f64>() - radius_sq
}

/// Whether `<p - q, grad F(r) - grad F(q)>` vanishes: the geodesic from `q`
/// to `r` meets the one from `q` to `p` at a Bregman right angle, in which
/// case `D(p||q) + D(q||r) = D(p||r)`.
pub fn is_bregman_orthogonal(gen: &Generator, p: &[f64], q: &[f64], r: &[f64]) -> Result<bool> {
    let gq = gen.gradient(q)?;
    let gr = gen.gradient(r)?;
    let a: Vec<f64> = p.iter().zip(q).map(|(a, b)| a - b).collect();
    let b: Vec<f64> = gr.iter().zip(&gq).map(|(a, b)| a - b).collect();
    let scale = 1.0 + norm(&a) * norm(&b);
    Ok(dot(&a, &b).abs() <= tol::ORTHOGONAL * scale)
}

fn check_simplex(gen: &Generator, simplex: &[Vec<f64>]) -> Result<usize> {
    let d = gen.dim();
    if simplex.len() != d + 1 {
        return Err(Error::invalid(MODULE, format!("a simplex in dimension {d} needs {} vertices", d + 1)));
    }
    for v in simplex {
        if v.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: v.len() });
        }
    }
    Ok(d)
}

/// The first-type ball whose boundary passes through the `d + 1` vertices.
///
/// Solves for the plane `z = <a, x> + b` through the lifted vertices; the
/// center is `(grad F)^-1(a)` and the radius `<a, c> - F(c) + b`.
pub fn circumsphere(gen: &Generator, simplex: &[Vec<f64>]) -> Result<Ball> {
    let d = check_simplex(gen, simplex)?;
    let mut m = DMatrix::zeros(d + 1, d + 1);
    let mut rhs = DVector::zeros(d + 1);
    for (i, v) in simplex.iter().enumerate() {
        for j in 0..d {
            m[(i, j)] = v[j];
        }
        m[(i, d)] = 1.0;
        rhs[i] = gen.value(v)?;
    }
    let sv = m.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > tol::MAX_CONDITION {
        return Err(Error::DegenerateSimplex { condition });
    }
    let sol = m.lu().solve(&rhs).ok_or(Error::DegenerateSimplex { condition: f64::INFINITY })?;
    let a: Vec<f64> = sol.iter().take(d).copied().collect();
    let b = sol[d];
    let c = gen.inverse_gradient(&a)?;
    let radius = dot(&a, &c) - gen.value(&c)? + b;
    Ok(Ball { center: c, radius: radius.max(0.0), kind: BallKind::First })
}

/// Normalized in-sphere determinant of `x` against the simplex: negative
/// inside the circumscribing first-type ball, positive outside.
///
/// The determinant of rows `(v_i - x, F(v_i) - F(x))` is divided by the
/// product of row norms and multiplied by the orientation sign of the simplex.
pub fn in_sphere_value(gen: &Generator, simplex: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    let d = check_simplex(gen, simplex)?;
    let fx = gen.value(x)?;
    let mut m = DMatrix::zeros(d + 1, d + 1);
    let mut orient = DMatrix::zeros(d, d);
    for (i, v) in simplex.iter().enumerate() {
        for j in 0..d {
            m[(i, j)] = v[j] - x[j];
            if i > 0 {
                orient[(i - 1, j)] = v[j] - simplex[0][j];
            }
        }
        m[(i, d)] = gen.value(v)? - fx;
    }
    let o = orient.determinant();
    if o == 0.0 {
        return Err(Error::DegenerateSimplex { condition: f64::INFINITY });
    }
    let scale: f64 = m.row_iter().map(|r| r.norm()).product();
    if scale == 0.0 {
        return Ok(0.0);
    }
    // The (d+2)-row lifted determinant with a leading row of ones equals
    // (-1)^(d+1) times this translated one.
    let sign = if d % 2 == 0 { -1.0 } else { 1.0 };
    Ok(sign * m.determinant() * o.signum() / scale)
}

/// Sign of [`in_sphere_value`] with the tolerance band mapped to zero:
/// `-1` inside, `0` on the sphere, `1` outside.
pub fn in_sphere(gen: &Generator, simplex: &[Vec<f64>], x: &[f64]) -> Result<i8> {
    let v = in_sphere_value(gen, simplex, x)?;
    Ok(if v.abs() < tol::IN_SPHERE {
        0
    } else if v < 0.0 {
        -1
    } else {
        1
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn first_type_bisector_of_shannon_points() {
        let g = Generator::shannon(1);
        let e = std::f64::consts::E;
        let h = bisector_first_type(&g, &[1.0], &[e]).unwrap();
        let root = -h.offset / h.normal[0];
        assert_relative_eq!(root, e - 1.0, epsilon = 1e-14);
        assert_relative_eq!(h.eval(&[1.0]), -g.divergence(&[1.0], &[e]).unwrap(), epsilon = 1e-14);
        assert_relative_eq!(h.eval(&[e]), g.divergence(&[e], &[1.0]).unwrap(), epsilon = 1e-14);
    }

    #[test]
    fn second_type_bisector_of_shannon_points() {
        let g = Generator::shannon(1);
        let h = bisector_second_type(&g, &[1.0], &[2.0]).unwrap();
        let y = -h.offset / h.normal[0];
        assert_relative_eq!(g.inverse_gradient(&[y]).unwrap()[0], 4.0 / std::f64::consts::E, epsilon = 1e-14);
    }

    #[test]
    fn circumsphere_of_unit_triangle() {
        let g = Generator::squared_half_norm(2);
        let s = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let b = circumsphere(&g, &s).unwrap();
        assert_relative_eq!(b.center[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(b.center[1], 0.5, epsilon = 1e-14);
        assert_relative_eq!(b.radius, 0.25, epsilon = 1e-14);
        assert_eq!(in_sphere(&g, &s, &[0.5, 0.5]).unwrap(), -1);
        assert_eq!(in_sphere(&g, &s, &[1.0, 1.0]).unwrap(), 0);
        assert_eq!(in_sphere(&g, &s, &[2.0, 2.0]).unwrap(), 1);
        let flipped = vec![s[1].clone(), s[0].clone(), s[2].clone()];
        assert_eq!(in_sphere(&g, &flipped, &[0.5, 0.5]).unwrap(), -1);
    }

    #[test]
    fn collinear_simplex_is_rejected() {
        let g = Generator::shannon(2);
        let s = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        assert!(matches!(circumsphere(&g, &s), Err(Error::DegenerateSimplex { .. })));
    }

    #[test]
    fn in_sphere_agrees_with_circumsphere_in_one_and_three_dimensions() {
        let g1 = Generator::burg(1);
        let s1 = vec![vec![0.5], vec![2.0]];
        assert_eq!(in_sphere(&g1, &s1, &[1.0]).unwrap(), -1);
        assert_eq!(in_sphere(&g1, &s1, &[3.0]).unwrap(), 1);
        let g3 = Generator::shannon(3);
        let s3 = vec![vec![1.0, 1.0, 1.0], vec![2.0, 1.0, 1.0], vec![1.0, 2.0, 1.0], vec![1.0, 1.0, 2.0]];
        let b = circumsphere(&g3, &s3).unwrap();
        for x in [[1.3, 1.3, 1.3], [3.0, 3.0, 3.0], [0.5, 1.2, 1.1]] {
            let inside = g3.divergence(&x, &b.center).unwrap() < b.radius;
            assert_eq!(in_sphere(&g3, &s3, &x).unwrap(), if inside { -1 } else { 1 }, "{x:?}");
        }
    }

    #[test]
    fn power_distance_orders_like_divergence() {
        let g = Generator::exponential(2);
        let (p, q, x) = ([0.1, 0.4], [-0.3, 0.2], [0.7, -0.5]);
        let (cp, rp) = power_ball(&g, &p).unwrap();
        let (cq, rq) = power_ball(&g, &q).unwrap();
        let dpow = power_distance(&cp, rp, &x) - power_distance(&cq, rq, &x);
        let ddiv = g.divergence(&x, &p).unwrap() - g.divergence(&x, &q).unwrap();
        assert_relative_eq!(dpow, 2.0 * ddiv, epsilon = 1e-12);
    }

    #[test]
    fn tangent_plane_touches_graph() {
        let g = Generator::shannon(2);
        let q = [0.7, 1.9];
        let h = tangent_hyperplane(&g, &q).unwrap();
        assert_relative_eq!(h.eval(&lift(&g, &q).unwrap()), 0.0, epsilon = 1e-14);
        let x = [1.5, 0.2];
        let mut lifted = lift(&g, &x).unwrap();
        lifted[2] = 0.0;
        let below = h.eval(&lifted);
        assert_relative_eq!(g.value(&x).unwrap() - below, g.divergence(&x, &q).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn orthogonality_detects_right_angles() {
        let g = Generator::squared_half_norm(2);
        assert!(is_bregman_orthogonal(&g, &[1.0, 0.0], &[0.0, 0.0], &[0.0, 1.0]).unwrap());
        assert!(!is_bregman_orthogonal(&g, &[1.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]).unwrap());
    }
}
