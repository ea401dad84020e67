use rand::Rng;
use rand_distr::{Distribution, InverseGaussian};

use super::Kernel;
use crate::special::{ln_normal_cdf, normal_cdf, LN_SQRT_2PI};

#[inline]
pub(super) fn log_density(y: f64, mu: f64, sigma2: f64) -> f64 {
    let d = y - mu;
    -LN_SQRT_2PI - 0.5 * sigma2.ln() - 1.5 * y.ln() - d * d / (2.0 * y * mu * mu * sigma2)
}

// F(y) = Φ(x(y/μ − 1)) + exp(2λ/μ) Φ(−x(y/μ + 1)), x = √(λ/y), λ = 1/σ²
fn reflected_term(y: f64, mu: f64, sigma2: f64) -> f64 {
    let lambda = 1.0 / sigma2;
    let x = (lambda / y).sqrt();
    (2.0 * lambda / mu + ln_normal_cdf(-x * (y / mu + 1.0))).exp()
}

pub(super) fn cdf(y: f64, mu: f64, sigma2: f64) -> f64 {
    let x = (1.0 / (sigma2 * y)).sqrt();
    let v = normal_cdf(x * (y / mu - 1.0)) + reflected_term(y, mu, sigma2);
    v.clamp(0.0, 1.0)
}

pub(super) fn sf(y: f64, mu: f64, sigma2: f64) -> f64 {
    let x = (1.0 / (sigma2 * y)).sqrt();
    let v = normal_cdf(-x * (y / mu - 1.0)) - reflected_term(y, mu, sigma2);
    v.clamp(0.0, 1.0)
}

pub(super) fn sample<R: Rng + ?Sized>(mu: f64, sigma2: f64, rng: &mut R) -> f64 {
    InverseGaussian::new(mu, 1.0 / sigma2)
        .expect("validated parameters")
        .sample(rng)
}

pub(super) fn weight(mu: f64, sigma2: f64, k: usize) -> f64 {
    match k {
        0 => 1.0 / (mu * sigma2),
        _ => 0.5,
    }
}

#[inline]
pub(super) fn kernel(y: f64, ly: f64, mu: f64, sigma2: f64, k: usize) -> Kernel {
    let d = y - mu;
    let q = d * d / (y * mu * mu * sigma2);
    let log_density = -LN_SQRT_2PI - 0.5 * sigma2.ln() - 1.5 * ly - 0.5 * q;
    let (score, weight) = match k {
        0 => (d / (mu * mu * sigma2), 1.0 / (mu * sigma2)),
        _ => (0.5 * (q - 1.0), 0.5),
    };
    Kernel {
        log_density,
        score,
        weight,
    }
}
