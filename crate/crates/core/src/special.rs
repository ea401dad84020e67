//! Scalar special functions shared by the families and scoring code.

use statrs::function::erf::{erfc, erfc_inv};
pub use statrs::function::gamma::{digamma, gamma_lr, gamma_ur, ln_gamma};

use std::f64::consts::SQRT_2;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Standard normal cdf Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// log Φ(x), accurate deep into the lower tail.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x > -30.0 {
        return normal_cdf(x).ln();
    }
    // Asymptotic Mills-ratio expansion.
    let x2 = x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..8 {
        term *= -((2 * k - 1) as f64) / x2;
        sum += term;
    }
    -0.5 * x2 - (-x).ln() - LN_SQRT_2PI + sum.ln()
}

/// Standard normal quantile Φ⁻¹(p).
///
/// The rational approximation behind `erfc_inv` is only good to about
/// 1e-10, so the result is polished with Halley steps on the lower tail.
pub fn normal_quantile(p: f64) -> f64 {
    if p > 0.5 {
        return -normal_quantile(1.0 - p);
    }
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let mut x = -SQRT_2 * erfc_inv(2.0 * p);
    if p == 0.5 {
        return 0.0;
    }
    for _ in 0..2 {
        let pdf = normal_pdf(x);
        if pdf == 0.0 {
            break;
        }
        let e = (normal_cdf(x) - p) / pdf;
        x -= e / (1.0 + 0.5 * x * e);
    }
    x
}

/// Trigamma ψ'(x) for x > 0 via upward recurrence and the asymptotic series.
pub fn trigamma(mut x: f64) -> f64 {
    if x <= 0.0 || !x.is_finite() {
        return f64::NAN;
    }
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    let tail = r
        + 0.5 * r2
        + r * r2
            * (1.0 / 6.0
                + r2 * (-1.0 / 30.0 + r2 * (1.0 / 42.0 + r2 * (-1.0 / 30.0 + r2 * 5.0 / 66.0))));
    acc + tail
}

/// log(1 + e^x) without overflow.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `(log(1 + e^x), 1 / (1 + e^{-x}))` sharing one exponential.
#[inline]
pub fn log1p_exp_and_logistic(x: f64) -> (f64, f64) {
    if x > 0.0 {
        let e = (-x).exp();
        (x + e.ln_1p(), 1.0 / (1.0 + e))
    } else {
        let e = x.exp();
        (e.ln_1p(), e / (1.0 + e))
    }
}

/// Logistic function 1 / (1 + e^{-x}).
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}
