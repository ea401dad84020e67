//! Blockwise Metropolis–Hastings with IWLS proposals and Gibbs updates of
//! the smoothing variances.

mod chain;
mod store;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

pub use chain::{BlockStats, ChainState, Proposal, Sampler};
pub use store::{BlockSlot, PosteriorStore, RunReport, VarianceSlot};

use crate::design::AssembledModel;
use crate::{Error, Result};

fn default_iterations() -> usize {
    12_000
}

fn default_burn_in() -> usize {
    2_000
}

fn default_thin() -> usize {
    10
}

fn default_seed() -> u64 {
    1
}

fn default_tau2() -> f64 {
    10.0
}

fn default_audit() -> usize {
    500
}

fn default_warmup() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Visit blocks in a random order each sweep instead of the fixed
    /// parameter-then-block order.
    #[serde(default)]
    pub random_scan: bool,
    /// Starting value of every smoothing variance.
    #[serde(default = "default_tau2")]
    pub tau2_start: f64,
    /// Iterations between recomputations of the cached predictors.
    #[serde(default = "default_audit")]
    pub audit_every: usize,
    /// Maximum number of mode-seeking sweeps before the first iteration;
    /// 0 starts sampling from the initial values.
    #[serde(default = "default_warmup")]
    pub warmup: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: default_iterations(),
            burn_in: default_burn_in(),
            thin: default_thin(),
            seed: default_seed(),
            random_scan: false,
            tau2_start: default_tau2(),
            audit_every: default_audit(),
            warmup: default_warmup(),
        }
    }
}

impl SamplerConfig {
    pub fn short(iterations: usize, burn_in: usize, thin: usize, seed: u64) -> Self {
        Self {
            iterations,
            burn_in,
            thin,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::invalid(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be at least 1"));
        }
        if !(self.tau2_start > 0.0 && self.tau2_start.is_finite()) {
            return Err(Error::invalid("tau2_start must be positive"));
        }
        if self.audit_every == 0 {
            return Err(Error::invalid("audit_every must be at least 1"));
        }
        Ok(())
    }

    /// Number of retained draws.
    pub fn n_retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Shape and scale of the inverse-gamma full conditional of τ².
pub fn variance_posterior(quad_form: f64, rank: usize, a: f64, b: f64) -> (f64, f64) {
    (rank as f64 / 2.0 + a, 0.5 * quad_form + b)
}

/// Draws τ² ~ IG(rank/2 + a, β'Kβ/2 + b) where `quad_form = β'Kβ`.
pub fn gibbs_variance<R: Rng + ?Sized>(quad_form: f64, rank: usize, a: f64, b: f64, rng: &mut R) -> f64 {
    let (shape, scale) = variance_posterior(quad_form, rank, a, b);
    let g = Gamma::new(shape, 1.0 / scale).expect("inverse-gamma parameters are positive");
    1.0 / g.sample(rng)
}

/// Runs one chain on the assembled model for responses `y`.
pub fn run_chain(model: &AssembledModel, y: &[f64], config: &SamplerConfig) -> Result<PosteriorStore> {
    Sampler::new(model, y, config.clone())?.run()
}
