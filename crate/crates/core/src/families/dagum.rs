use rand::Rng;
use rand_distr::Open01;

use super::Kernel;
use crate::special::{digamma, log1p_exp, log1p_exp_and_logistic, trigamma};

/// Parameter order is (a, b, c); b is the scale.
pub const DAGUM_LOCATION: usize = 1;

// With x = a·log(y/b): log p = log a + log c − log y + c·x − (c+1)·log(1 + e^x)
#[inline]
pub(super) fn log_density(y: f64, a: f64, b: f64, c: f64) -> f64 {
    let ly = y.ln();
    let x = a * (ly - b.ln());
    a.ln() + c.ln() - ly + c * x - (c + 1.0) * log1p_exp(x)
}

pub(super) fn cdf(y: f64, a: f64, b: f64, c: f64) -> f64 {
    let x = a * (y.ln() - b.ln());
    (-c * log1p_exp(-x)).exp()
}

pub(super) fn sf(y: f64, a: f64, b: f64, c: f64) -> f64 {
    let x = a * (y.ln() - b.ln());
    -(-c * log1p_exp(-x)).exp_m1()
}

pub(super) fn quantile(p: f64, a: f64, b: f64, c: f64) -> f64 {
    // y = b (p^{−1/c} − 1)^{−1/a}
    let inner = (-p.ln() / c).exp_m1();
    b * (-inner.ln() / a).exp()
}

pub(super) fn sample<R: Rng + ?Sized>(a: f64, b: f64, c: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    quantile(u, a, b, c)
}

/// Expected weight for the predictor of `a`; it depends on `c` only.
///
/// With u = F(y)^{1/c} ~ Beta(c, 1) and X = log(u / (1 − u)), the score is
/// 1 + X·(c − (c+1)u). Its variance reduces to beta-shifted moments of X:
/// E[X²(c − (c+1)u)²] = c/((c+1)(c+2)) · [2c·M(c,3) − 2c·M(c+1,2) + (c+1)·M(c+2,1)]
/// where M(α,β) = ψ'(α) + ψ'(β) + (ψ(α) − ψ(β))².
pub fn dagum_shape_weight(c: f64) -> f64 {
    const EULER: f64 = 0.577_215_664_901_532_9;
    const PI2_6: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
    let d0 = digamma(c);
    let t0 = trigamma(c);
    let d1 = d0 + 1.0 / c;
    let t1 = t0 - 1.0 / (c * c);
    let d2 = d1 + 1.0 / (c + 1.0);
    let t2 = t1 - 1.0 / ((c + 1.0) * (c + 1.0));
    // ψ(1), ψ(2), ψ(3) and ψ'(1), ψ'(2), ψ'(3)
    let (e1, e2, e3) = (-EULER, 1.0 - EULER, 1.5 - EULER);
    let (s1, s2, s3) = (PI2_6, PI2_6 - 1.0, PI2_6 - 1.25);
    let m = |d: f64, t: f64, e: f64, s: f64| t + s + (d - e) * (d - e);
    let m_c3 = m(d0, t0, e3, s3);
    let m_c2 = m(d1, t1, e2, s2);
    let m_c1 = m(d2, t2, e1, s1);
    c / ((c + 1.0) * (c + 2.0)) * (2.0 * c * m_c3 - 2.0 * c * m_c2 + (c + 1.0) * m_c1) - 1.0
}

pub(super) fn weight(a: f64, _b: f64, c: f64, k: usize) -> f64 {
    match k {
        0 => dagum_shape_weight(c),
        1 => a * a * c / (c + 2.0),
        _ => 1.0,
    }
}

#[inline]
pub(super) fn kernel(_y: f64, ly: f64, a: f64, b: f64, c: f64, k: usize) -> Kernel {
    let x = a * (ly - b.ln());
    let (sp, u) = log1p_exp_and_logistic(x);
    let log_density = a.ln() + c.ln() - ly + c * x - (c + 1.0) * sp;
    let (score, weight) = match k {
        0 => (1.0 + x * (c - (c + 1.0) * u), dagum_shape_weight(c)),
        1 => (a * ((c + 1.0) * u - c), a * a * c / (c + 2.0)),
        // log u = x − log(1 + e^x)
        _ => (1.0 + c * (x - sp), 1.0),
    };
    Kernel {
        log_density,
        score,
        weight,
    }
}
