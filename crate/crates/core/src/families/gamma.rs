use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::Kernel;
use crate::special::{digamma, gamma_lr, gamma_ur, ln_gamma, trigamma};

// Mean μ and shape σ: p(y) = (σ/μ)^σ y^{σ−1} e^{−σy/μ} / Γ(σ)
#[inline]
pub(super) fn log_density(y: f64, mu: f64, sigma: f64) -> f64 {
    sigma * (sigma / mu).ln() + (sigma - 1.0) * y.ln() - ln_gamma(sigma) - sigma * y / mu
}

pub(super) fn cdf(y: f64, mu: f64, sigma: f64) -> f64 {
    gamma_lr(sigma, sigma * y / mu)
}

pub(super) fn sf(y: f64, mu: f64, sigma: f64) -> f64 {
    gamma_ur(sigma, sigma * y / mu)
}

pub(super) fn sample<R: Rng + ?Sized>(mu: f64, sigma: f64, rng: &mut R) -> f64 {
    Gamma::new(sigma, mu / sigma)
        .expect("validated parameters")
        .sample(rng)
}

pub(super) fn weight(_mu: f64, sigma: f64, k: usize) -> f64 {
    match k {
        0 => sigma,
        _ => sigma * (sigma * trigamma(sigma) - 1.0),
    }
}

#[inline]
pub(super) fn kernel(y: f64, ly: f64, mu: f64, sigma: f64, k: usize) -> Kernel {
    let lgs = ln_gamma(sigma);
    let ratio = y / mu;
    let log_density = sigma * (sigma / mu).ln() + (sigma - 1.0) * ly - lgs - sigma * ratio;
    let (score, weight) = match k {
        0 => (sigma * (ratio - 1.0), sigma),
        _ => (
            sigma * ((sigma / mu).ln() + 1.0 + ly - digamma(sigma) - ratio),
            sigma * (sigma * trigamma(sigma) - 1.0),
        ),
    };
    Kernel {
        log_density,
        score,
        weight,
    }
}
