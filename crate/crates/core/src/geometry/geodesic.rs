use super::MODULE;
use crate::divergence::Generator;
use crate::error::{Error, Result};
use crate::tol;

/// The two families of Bregman geodesics joining `p` to `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeodesicKind {
    /// Straight in gradient coordinates: `(grad F)^-1((1-t) p' + t q')`.
    Gamma,
    /// Straight in source coordinates: `(1-t) p + t q`.
    Lambda,
}

pub fn geodesic_point(gen: &Generator, p: &[f64], q: &[f64], t: f64, kind: GeodesicKind) -> Result<Vec<f64>> {
    match kind {
        GeodesicKind::Lambda => {
            let x: Vec<f64> = p.iter().zip(q).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            gen.value(&x)?;
            Ok(x)
        }
        GeodesicKind::Gamma => {
            let gp = gen.gradient(p)?;
            let gq = gen.gradient(q)?;
            let y: Vec<f64> = gp.iter().zip(&gq).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            gen.inverse_gradient(&y)
        }
    }
}

/// Accumulated divergence along a geodesic from `p0` to `p1`.
///
/// For `Gamma` this is `int_0^1 D_F(gamma(t) || p0) dt`; for `Lambda` it is
/// `int_0^1 D_F(p0 || lambda(t)) dt`. Each geodesic minimizes its own
/// functional among curves whose point at time `t` is confined to the
/// corresponding sweep hyperplane.
pub fn geodesic_length(gen: &Generator, p0: &[f64], p1: &[f64], kind: GeodesicKind) -> Result<f64> {
    let integrand = |t: f64| -> Result<f64> {
        let x = geodesic_point(gen, p0, p1, t, kind)?;
        match kind {
            GeodesicKind::Gamma => gen.divergence(&x, p0),
            GeodesicKind::Lambda => gen.divergence(p0, &x),
        }
    };
    adaptive_simpson(&integrand, 0.0, 1.0, tol::QUADRATURE)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, eps: f64) -> Result<f64> {
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, eps, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> Result<f64>,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if !delta.is_finite() {
        return Err(Error::non_finite(MODULE, "geodesic quadrature"));
    }
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn euclidean_geodesic_length_is_one_sixth_of_squared_distance() {
        let g = Generator::squared_half_norm(2);
        for kind in [GeodesicKind::Gamma, GeodesicKind::Lambda] {
            let l = geodesic_length(&g, &[0.0, 0.0], &[1.0, 0.0], kind).unwrap();
            assert_relative_eq!(l, 1.0 / 6.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn geodesics_hit_their_endpoints() {
        let g = Generator::shannon(2);
        let (p, q) = ([0.3, 2.0], [1.7, 0.4]);
        for kind in [GeodesicKind::Gamma, GeodesicKind::Lambda] {
            let a = geodesic_point(&g, &p, &q, 0.0, kind).unwrap();
            let b = geodesic_point(&g, &p, &q, 1.0, kind).unwrap();
            assert_relative_eq!(a[0], p[0], max_relative = 1e-14);
            assert_relative_eq!(b[1], q[1], max_relative = 1e-14);
        }
        let mid = geodesic_point(&g, &p, &q, 0.5, GeodesicKind::Gamma).unwrap();
        assert_relative_eq!(mid[0], (p[0] * q[0]).sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let v = adaptive_simpson(&|t: f64| Ok(t.exp()), 0.0, 1.0, 1e-10).unwrap();
        assert_relative_eq!(v, std::f64::consts::E - 1.0, epsilon = 1e-10);
    }
}
