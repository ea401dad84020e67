use rand::Rng;
use rand_distr::StandardNormal;

use super::Kernel;
use crate::special::{normal_cdf, normal_quantile, LN_SQRT_2PI};

#[inline]
pub(super) fn log_density(y: f64, mu: f64, sigma2: f64) -> f64 {
    let ly = y.ln();
    let r = ly - mu;
    -LN_SQRT_2PI - 0.5 * sigma2.ln() - ly - r * r / (2.0 * sigma2)
}

pub(super) fn cdf(y: f64, mu: f64, sigma2: f64) -> f64 {
    normal_cdf((y.ln() - mu) / sigma2.sqrt())
}

pub(super) fn sf(y: f64, mu: f64, sigma2: f64) -> f64 {
    normal_cdf(-(y.ln() - mu) / sigma2.sqrt())
}

pub(super) fn quantile(p: f64, mu: f64, sigma2: f64) -> f64 {
    (mu + sigma2.sqrt() * normal_quantile(p)).exp()
}

pub(super) fn sample<R: Rng + ?Sized>(mu: f64, sigma2: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (mu + sigma2.sqrt() * z).exp()
}

pub(super) fn weight(_mu: f64, sigma2: f64, k: usize) -> f64 {
    match k {
        0 => 1.0 / sigma2,
        _ => 0.5,
    }
}

#[inline]
pub(super) fn kernel(_y: f64, ly: f64, mu: f64, sigma2: f64, k: usize) -> Kernel {
    let r = ly - mu;
    let q = r * r / sigma2;
    let log_density = -LN_SQRT_2PI - 0.5 * sigma2.ln() - ly - 0.5 * q;
    let (score, weight) = match k {
        0 => (r / sigma2, 1.0 / sigma2),
        _ => (0.5 * (q - 1.0), 0.5),
    };
    Kernel {
        log_density,
        score,
        weight,
    }
}
