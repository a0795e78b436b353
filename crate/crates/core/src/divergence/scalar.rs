//! Univariate strictly convex generators with closed-form derivatives,
//! inverse derivatives and Legendre conjugates.

/// A univariate strictly convex, differentiable function on an open interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Scalar {
    /// `c x^2` on the real line.
    Quad(f64),
    /// `x^a` on `(0, inf)` for an integer `a >= 2`.
    NormLike(u32),
    /// Conjugate of `NormLike(a)`: `(a - 1) (y / a)^(a / (a - 1))` on `(0, inf)`.
    NormLikeDual(u32),
    /// `x log x - x` on `(0, inf)`.
    Shannon,
    /// `e^x` on the real line.
    Exponential,
    /// `-log x` on `(0, inf)`.
    Burg,
    /// `-1 - log(-y)` on `(-inf, 0)`.
    BurgDual,
    /// `x log x + (1 - x) log(1 - x)` on `(0, 1)`.
    BitEntropy,
    /// `log(1 + e^x)` on the real line.
    DualBitEntropy,
    /// `-sqrt(1 - x^2)` on `(-1, 1)`.
    Hellinger,
    /// `sqrt(1 + y^2)` on the real line.
    HellingerDual,
}

const INF: f64 = f64::INFINITY;

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

impl Scalar {
    pub fn f(self, x: f64) -> f64 {
        match self {
            Scalar::Quad(c) => c * x * x,
            Scalar::NormLike(a) => x.powi(a as i32),
            Scalar::NormLikeDual(a) => {
                let a = a as f64;
                (a - 1.0) * (x / a).powf(a / (a - 1.0))
            }
            Scalar::Shannon => xlogx(x) - x,
            Scalar::Exponential => x.exp(),
            Scalar::Burg => -x.ln(),
            Scalar::BurgDual => -1.0 - (-x).ln(),
            Scalar::BitEntropy => xlogx(x) + xlogx(1.0 - x),
            Scalar::DualBitEntropy => softplus(x),
            Scalar::Hellinger => -((1.0 - x) * (1.0 + x)).sqrt(),
            Scalar::HellingerDual => x.hypot(1.0),
        }
    }

    pub fn d1(self, x: f64) -> f64 {
        match self {
            Scalar::Quad(c) => 2.0 * c * x,
            Scalar::NormLike(a) => a as f64 * x.powi(a as i32 - 1),
            Scalar::NormLikeDual(a) => {
                let a = a as f64;
                (x / a).powf(1.0 / (a - 1.0))
            }
            Scalar::Shannon => x.ln(),
            Scalar::Exponential => x.exp(),
            Scalar::Burg => -1.0 / x,
            Scalar::BurgDual => -1.0 / x,
            Scalar::BitEntropy => x.ln() - (-x).ln_1p(),
            Scalar::DualBitEntropy => sigmoid(x),
            Scalar::Hellinger => x / ((1.0 - x) * (1.0 + x)).sqrt(),
            Scalar::HellingerDual => x / x.hypot(1.0),
        }
    }

    pub fn d2(self, x: f64) -> f64 {
        match self {
            Scalar::Quad(c) => 2.0 * c,
            Scalar::NormLike(a) => {
                let af = a as f64;
                af * (af - 1.0) * x.powi(a as i32 - 2)
            }
            Scalar::NormLikeDual(a) => {
                let a = a as f64;
                let b = 1.0 / (a - 1.0);
                b / a * (x / a).powf(b - 1.0)
            }
            Scalar::Shannon => 1.0 / x,
            Scalar::Exponential => x.exp(),
            Scalar::Burg | Scalar::BurgDual => 1.0 / (x * x),
            Scalar::BitEntropy => 1.0 / (x * (1.0 - x)),
            Scalar::DualBitEntropy => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Scalar::Hellinger => ((1.0 - x) * (1.0 + x)).powf(-1.5),
            Scalar::HellingerDual => (1.0 + x * x).powf(-1.5),
        }
    }

    /// Inverse of `d1`; defined on `image()`.
    pub fn inv_d1(self, y: f64) -> f64 {
        match self {
            Scalar::Quad(c) => y / (2.0 * c),
            Scalar::NormLike(a) => {
                let a = a as f64;
                (y / a).powf(1.0 / (a - 1.0))
            }
            Scalar::NormLikeDual(a) => a as f64 * y.powi(a as i32 - 1),
            Scalar::Shannon => y.exp(),
            Scalar::Exponential => y.ln(),
            Scalar::Burg | Scalar::BurgDual => -1.0 / y,
            Scalar::BitEntropy => sigmoid(y),
            Scalar::DualBitEntropy => y.ln() - (-y).ln_1p(),
            Scalar::Hellinger => y / y.hypot(1.0),
            Scalar::HellingerDual => y / ((1.0 - y) * (1.0 + y)).sqrt(),
        }
    }

    /// Open interval on which the function is defined.
    pub fn interval(self) -> (f64, f64) {
        match self {
            Scalar::Quad(_) | Scalar::Exponential | Scalar::DualBitEntropy | Scalar::HellingerDual => {
                (-INF, INF)
            }
            Scalar::NormLike(_) | Scalar::NormLikeDual(_) | Scalar::Shannon | Scalar::Burg => (0.0, INF),
            Scalar::BurgDual => (-INF, 0.0),
            Scalar::BitEntropy => (0.0, 1.0),
            Scalar::Hellinger => (-1.0, 1.0),
        }
    }

    /// Open interval swept by `d1`, which is the conjugate's interval.
    pub fn image(self) -> (f64, f64) {
        self.dual().interval()
    }

    pub fn dual(self) -> Scalar {
        match self {
            Scalar::Quad(c) => Scalar::Quad(0.25 / c),
            Scalar::NormLike(a) => Scalar::NormLikeDual(a),
            Scalar::NormLikeDual(a) => Scalar::NormLike(a),
            Scalar::Shannon => Scalar::Exponential,
            Scalar::Exponential => Scalar::Shannon,
            Scalar::Burg => Scalar::BurgDual,
            Scalar::BurgDual => Scalar::Burg,
            Scalar::BitEntropy => Scalar::DualBitEntropy,
            Scalar::DualBitEntropy => Scalar::BitEntropy,
            Scalar::Hellinger => Scalar::HellingerDual,
            Scalar::HellingerDual => Scalar::Hellinger,
        }
    }

    /// `d1` extended to the closed interval by its one-sided limits.
    pub fn d1_limit(self, t: f64) -> f64 {
        let (lo, hi) = self.interval();
        let (ilo, ihi) = self.image();
        if t <= lo {
            ilo
        } else if t >= hi {
            ihi
        } else {
            self.d1(t)
        }
    }
}
