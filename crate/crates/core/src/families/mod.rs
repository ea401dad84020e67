//! Response families: log-normal, inverse Gaussian, gamma and Dagum.
//!
//! Each family exposes its density, cdf, quantile function and random
//! sampling, together with the derivatives the IWLS proposals need: the
//! score `∂ℓ/∂η_k` of the log-density with respect to the k-th predictor and
//! the expected working weight `E(−∂²ℓ/∂η_k²)`. Derivatives are taken
//! through the response function of each parameter, so they live on the
//! predictor scale.

mod dagum;
mod gamma;
mod invgauss;
mod lognormal;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use dagum::{dagum_shape_weight, DAGUM_LOCATION};

/// Largest number of distribution parameters any family carries.
pub const MAX_PARAMS: usize = 3;

/// Predictors are clamped to `[-ETA_CLAMP, ETA_CLAMP]` before a log-link
/// response function is applied.
pub const ETA_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "lognormal")]
    LogNormal,
    #[serde(rename = "inverse_gaussian", alias = "invgauss")]
    InverseGaussian,
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "dagum")]
    Dagum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Identity,
    Log,
}

impl Link {
    /// Response function h(η); the flag reports whether η had to be clamped.
    #[inline]
    pub fn response(self, eta: f64) -> (f64, bool) {
        match self {
            Link::Identity => (eta, false),
            Link::Log => {
                if eta > ETA_CLAMP {
                    (ETA_CLAMP.exp(), true)
                } else if eta < -ETA_CLAMP {
                    ((-ETA_CLAMP).exp(), true)
                } else {
                    (eta.exp(), false)
                }
            }
        }
    }

    /// Link function η = h⁻¹(ϑ).
    #[inline]
    pub fn link(self, value: f64) -> f64 {
        match self {
            Link::Identity => value,
            Link::Log => value.ln(),
        }
    }
}

/// Distribution parameters on their natural scale.
#[derive(Debug, Clone, Copy)]
pub struct ParamVector {
    values: [f64; MAX_PARAMS],
    len: usize,
}

impl ParamVector {
    pub fn new(values: &[f64]) -> Self {
        assert!(values.len() <= MAX_PARAMS && !values.is_empty());
        let mut v = [f64::NAN; MAX_PARAMS];
        v[..values.len()].copy_from_slice(values);
        Self {
            values: v,
            len: values.len(),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values[..self.len]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn with(mut self, k: usize, value: f64) -> Self {
        assert!(k < self.len);
        self.values[k] = value;
        self
    }
}

impl PartialEq for ParamVector {
    fn eq(&self, other: &Self) -> bool {
        self.as_slice() == other.as_slice()
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.as_slice()[k]
    }
}

/// Log-likelihood contribution with score and working weight for one
/// predictor, evaluated together.
#[derive(Debug, Clone, Copy)]
pub struct Kernel {
    pub log_density: f64,
    pub score: f64,
    pub weight: f64,
}

pub const ALL_FAMILIES: [Family; 4] = [
    Family::LogNormal,
    Family::InverseGaussian,
    Family::Gamma,
    Family::Dagum,
];

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::LogNormal => "lognormal",
            Family::InverseGaussian => "inverse_gaussian",
            Family::Gamma => "gamma",
            Family::Dagum => "dagum",
        }
    }

    pub fn n_params(self) -> usize {
        match self {
            Family::Dagum => 3,
            _ => 2,
        }
    }

    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::LogNormal | Family::InverseGaussian => &["mu", "sigma2"],
            Family::Gamma => &["mu", "sigma"],
            Family::Dagum => &["a", "b", "c"],
        }
    }

    pub fn param_index(self, name: &str) -> Option<usize> {
        self.param_names().iter().position(|p| *p == name)
    }

    pub fn link(self, k: usize) -> Link {
        match (self, k) {
            (Family::LogNormal, 0) => Link::Identity,
            _ => Link::Log,
        }
    }

    /// Index of the parameter that carries the location/scale of the
    /// response (μ for the two-parameter families, b for Dagum).
    pub fn location_index(self) -> usize {
        match self {
            Family::Dagum => DAGUM_LOCATION,
            _ => 0,
        }
    }

    /// Maps predictor values to a parameter vector, returning the number of
    /// clamped components alongside.
    pub fn params_from_eta(self, eta: &[f64]) -> (ParamVector, usize) {
        debug_assert_eq!(eta.len(), self.n_params());
        let mut values = [f64::NAN; MAX_PARAMS];
        let mut clamps = 0;
        for (k, &e) in eta.iter().enumerate() {
            let (v, c) = self.link(k).response(e);
            values[k] = v;
            clamps += c as usize;
        }
        (
            ParamVector {
                values,
                len: eta.len(),
            },
            clamps,
        )
    }

    pub fn eta_from_params(self, theta: &ParamVector) -> Vec<f64> {
        theta
            .as_slice()
            .iter()
            .enumerate()
            .map(|(k, &v)| self.link(k).link(v))
            .collect()
    }

    pub fn validate(self, theta: &ParamVector) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch(format!(
                "{} expects {} parameters, got {}",
                self.name(),
                self.n_params(),
                theta.len()
            )));
        }
        for (k, &v) in theta.as_slice().iter().enumerate() {
            let ok = match self.link(k) {
                Link::Identity => v.is_finite(),
                Link::Log => v.is_finite() && v > 0.0,
            };
            if !ok {
                return Err(Error::InvalidParameter {
                    name: self.param_names()[k],
                    value: v,
                });
            }
        }
        Ok(())
    }

    fn check_y(self, y: f64) -> Result<()> {
        if y > 0.0 && y.is_finite() {
            Ok(())
        } else {
            Err(Error::OutOfSupport {
                family: self.name(),
                value: y,
            })
        }
    }

    fn check_k(self, k: usize) -> Result<()> {
        if k < self.n_params() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "parameter index {k} out of range for {}",
                self.name()
            )))
        }
    }

    pub fn log_density(self, y: f64, theta: &ParamVector) -> Result<f64> {
        self.check_y(y)?;
        self.validate(theta)?;
        Ok(self.log_density_unchecked(y, theta))
    }

    pub fn density(self, y: f64, theta: &ParamVector) -> Result<f64> {
        Ok(self.log_density(y, theta)?.exp())
    }

    /// Log-density without argument checks; may return NaN or -inf for
    /// illegal input.
    #[inline]
    pub fn log_density_unchecked(self, y: f64, theta: &ParamVector) -> f64 {
        let p = theta.as_slice();
        match self {
            Family::LogNormal => lognormal::log_density(y, p[0], p[1]),
            Family::InverseGaussian => invgauss::log_density(y, p[0], p[1]),
            Family::Gamma => gamma::log_density(y, p[0], p[1]),
            Family::Dagum => dagum::log_density(y, p[0], p[1], p[2]),
        }
    }

    /// Density at any real `y`, zero outside the support. Used by quadrature.
    pub(crate) fn density_or_zero(self, y: f64, theta: &ParamVector) -> f64 {
        if y > 0.0 && y.is_finite() {
            let v = self.log_density_unchecked(y, theta).exp();
            if v.is_finite() {
                v
            } else {
                0.0
            }
        } else {
            0.0
        }
    }

    pub fn cdf(self, y: f64, theta: &ParamVector) -> Result<f64> {
        self.validate(theta)?;
        if y <= 0.0 {
            return Ok(0.0);
        }
        if y == f64::INFINITY {
            return Ok(1.0);
        }
        if y.is_nan() {
            return Err(Error::OutOfSupport {
                family: self.name(),
                value: y,
            });
        }
        Ok(self.cdf_unchecked(y, theta))
    }

    /// Survival function 1 − F(y), computed without cancellation.
    pub fn sf(self, y: f64, theta: &ParamVector) -> Result<f64> {
        self.validate(theta)?;
        if y <= 0.0 {
            return Ok(1.0);
        }
        if y == f64::INFINITY {
            return Ok(0.0);
        }
        Ok(self.sf_unchecked(y, theta))
    }

    pub(crate) fn cdf_unchecked(self, y: f64, theta: &ParamVector) -> f64 {
        let p = theta.as_slice();
        match self {
            Family::LogNormal => lognormal::cdf(y, p[0], p[1]),
            Family::InverseGaussian => invgauss::cdf(y, p[0], p[1]),
            Family::Gamma => gamma::cdf(y, p[0], p[1]),
            Family::Dagum => dagum::cdf(y, p[0], p[1], p[2]),
        }
    }

    pub(crate) fn sf_unchecked(self, y: f64, theta: &ParamVector) -> f64 {
        let p = theta.as_slice();
        match self {
            Family::LogNormal => lognormal::sf(y, p[0], p[1]),
            Family::InverseGaussian => invgauss::sf(y, p[0], p[1]),
            Family::Gamma => gamma::sf(y, p[0], p[1]),
            Family::Dagum => dagum::sf(y, p[0], p[1], p[2]),
        }
    }

    pub fn quantile(self, prob: f64, theta: &ParamVector) -> Result<f64> {
        if !(prob > 0.0 && prob < 1.0) {
            return Err(Error::InvalidProbability(prob));
        }
        self.validate(theta)?;
        let p = theta.as_slice();
        let q = match self {
            Family::LogNormal => lognormal::quantile(prob, p[0], p[1]),
            Family::Dagum => dagum::quantile(prob, p[0], p[1], p[2]),
            Family::Gamma | Family::InverseGaussian => self.quantile_by_root(prob, theta)?,
        };
        if q.is_finite() && q > 0.0 {
            Ok(q)
        } else {
            Err(Error::Numerical(format!(
                "{} quantile at p = {prob} is not representable",
                self.name()
            )))
        }
    }

    /// Safeguarded Newton iteration on log y for families without a closed
    /// form quantile function. The upper half is solved on the survival
    /// function to keep relative precision in the tail.
    fn quantile_by_root(self, prob: f64, theta: &ParamVector) -> Result<f64> {
        let upper = prob > 0.5;
        let target = if upper { 1.0 - prob } else { prob };
        // residual r(s) is increasing in s = log y
        let resid = |s: f64| -> f64 {
            let y = s.exp();
            if upper {
                target - self.sf_unchecked(y, theta)
            } else {
                self.cdf_unchecked(y, theta) - target
            }
        };
        let (mean, var) = self.raw_mean_var(theta);
        let ln_sd = (1.0 + var / (mean * mean)).ln().sqrt();
        let guess = mean.ln() - 0.5 * ln_sd * ln_sd + ln_sd * crate::special::normal_quantile(prob);
        let step = ln_sd.max(0.1);
        let (mut lo, mut hi) = (guess - step, guess + step);
        let mut it = 0;
        while resid(lo) > 0.0 {
            lo -= step * (1 << it.min(20)) as f64;
            it += 1;
            if it > 200 {
                return Err(Error::Numerical("quantile bracket failed".into()));
            }
        }
        it = 0;
        while resid(hi) < 0.0 {
            hi += step * (1 << it.min(20)) as f64;
            it += 1;
            if it > 200 {
                return Err(Error::Numerical("quantile bracket failed".into()));
            }
        }
        let mut s = guess.clamp(lo, hi);
        for _ in 0..200 {
            let r = resid(s);
            if r == 0.0 {
                return Ok(s.exp());
            }
            if r > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let y = s.exp();
            // d r / d s = f(y) * y for both orientations
            let slope = self.density_or_zero(y, theta) * y;
            let mut next = s - r / slope;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 1e-14 * (1.0 + s.abs()) || hi - lo <= 1e-15 * (1.0 + s.abs()) {
                return Ok(next.exp());
            }
            s = next;
        }
        Ok(s.exp())
    }

    fn raw_mean_var(self, theta: &ParamVector) -> (f64, f64) {
        let p = theta.as_slice();
        match self {
            Family::LogNormal => {
                let m = (p[0] + 0.5 * p[1]).exp();
                (m, m * m * p[1].exp_m1())
            }
            Family::InverseGaussian => (p[0], p[0].powi(3) * p[1]),
            Family::Gamma => (p[0], p[0] * p[0] / p[1]),
            Family::Dagum => {
                let med = dagum::quantile(0.5, p[0], p[1], p[2]);
                (med, med * med)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, theta: &ParamVector, rng: &mut R) -> Result<f64> {
        self.validate(theta)?;
        let p = theta.as_slice();
        Ok(match self {
            Family::LogNormal => lognormal::sample(p[0], p[1], rng),
            Family::InverseGaussian => invgauss::sample(p[0], p[1], rng),
            Family::Gamma => gamma::sample(p[0], p[1], rng),
            Family::Dagum => dagum::sample(p[0], p[1], p[2], rng),
        })
    }

    /// Score `∂ℓ/∂η_k` for the k-th predictor.
    pub fn score(self, y: f64, theta: &ParamVector, k: usize) -> Result<f64> {
        self.check_y(y)?;
        self.validate(theta)?;
        self.check_k(k)?;
        Ok(self.kernel_unchecked(y, theta, k).score)
    }

    /// Expected working weight `E(−∂²ℓ/∂η_k²)` under the family at `theta`.
    pub fn expected_weight(self, theta: &ParamVector, k: usize) -> Result<f64> {
        self.validate(theta)?;
        self.check_k(k)?;
        Ok(self.weight_unchecked(theta, k))
    }

    #[inline]
    pub fn weight_unchecked(self, theta: &ParamVector, k: usize) -> f64 {
        let p = theta.as_slice();
        match self {
            Family::LogNormal => lognormal::weight(p[0], p[1], k),
            Family::InverseGaussian => invgauss::weight(p[0], p[1], k),
            Family::Gamma => gamma::weight(p[0], p[1], k),
            Family::Dagum => dagum::weight(p[0], p[1], p[2], k),
        }
    }

    /// Log-density, score and weight for predictor `k` in one pass.
    #[inline]
    pub fn kernel_unchecked(self, y: f64, theta: &ParamVector, k: usize) -> Kernel {
        self.kernel_with_log(y, y.ln(), theta, k)
    }

    /// As [`Family::kernel_unchecked`] with `ln y` supplied by the caller.
    #[inline]
    pub fn kernel_with_log(self, y: f64, ly: f64, theta: &ParamVector, k: usize) -> Kernel {
        let p = theta.as_slice();
        match self {
            Family::LogNormal => lognormal::kernel(y, ly, p[0], p[1], k),
            Family::InverseGaussian => invgauss::kernel(y, ly, p[0], p[1], k),
            Family::Gamma => gamma::kernel(y, ly, p[0], p[1], k),
            Family::Dagum => dagum::kernel(y, ly, p[0], p[1], p[2], k),
        }
    }

    /// Crude moment-based starting values on the parameter scale.
    pub fn moment_start(self, y: &[f64]) -> Result<ParamVector> {
        if y.len() < 2 {
            return Err(Error::invalid("need at least two responses for starting values"));
        }
        for &v in y {
            self.check_y(v)?;
        }
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let lmean = ly.iter().sum::<f64>() / n;
        let lvar = ly.iter().map(|v| (v - lmean).powi(2)).sum::<f64>() / (n - 1.0);
        let var = var.max(1e-12 * mean * mean);
        let lvar = lvar.max(1e-12);
        let theta = match self {
            Family::LogNormal => ParamVector::new(&[lmean, lvar]),
            Family::InverseGaussian => ParamVector::new(&[mean, var / mean.powi(3)]),
            Family::Gamma => ParamVector::new(&[mean, mean * mean / var]),
            Family::Dagum => {
                // log-logistic start: c = 1, median b, sd(log y) = π / (a√3)
                let mut sorted = y.to_vec();
                sorted.sort_by(f64::total_cmp);
                let median = sorted[sorted.len() / 2];
                let a = std::f64::consts::PI / (3f64.sqrt() * lvar.sqrt());
                ParamVector::new(&[a, median, 1.0])
            }
        };
        Ok(theta)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lognormal" | "ln" => Ok(Family::LogNormal),
            "inverse_gaussian" | "invgauss" | "ig" => Ok(Family::InverseGaussian),
            "gamma" | "ga" => Ok(Family::Gamma),
            "dagum" | "da" => Ok(Family::Dagum),
            other => Err(Error::invalid(format!("unknown family '{other}'"))),
        }
    }
}

#[cfg(test)]
pub(crate) mod tests;
