use super::PredictiveSet;
use crate::special::normal_quantile;
use crate::Result;

/// PIT values are clamped to `[PIT_CLAMP, 1 − PIT_CLAMP]` before Φ⁻¹.
pub const PIT_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileResiduals {
    /// Unclamped PIT values F(y_i | ϑ̂_i).
    pub pit: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Number of PIT values moved by the clamp.
    pub clamped: usize,
}

/// u_i = F(y_i | ϑ̂_i).
pub fn pit_values(set: &PredictiveSet) -> Result<Vec<f64>> {
    set.iter().map(|(pred, y)| pred.cdf(y)).collect()
}

/// r_i = Φ⁻¹(u_i) with clamped u_i.
pub fn quantile_residuals(set: &PredictiveSet) -> Result<QuantileResiduals> {
    let pit = pit_values(set)?;
    let mut clamped = 0;
    let residuals = pit
        .iter()
        .map(|&u| {
            let c = u.clamp(PIT_CLAMP, 1.0 - PIT_CLAMP);
            clamped += (c != u) as usize;
            normal_quantile(c)
        })
        .collect();
    Ok(QuantileResiduals { pit, residuals, clamped })
}

/// (theoretical, sample) normal quantile pairs for a QQ plot, using
/// plotting positions (i − ½)/n.
pub fn qq_pairs(residuals: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = residuals.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, r)| (normal_quantile((i as f64 + 0.5) / n), r))
        .collect()
}

/// Kolmogorov–Smirnov distance between a sample and a continuous cdf.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i as f64 + 1.0) / n - f)
        })
        .fold(0.0, f64::max)
}

pub fn ks_uniform(u: &[f64]) -> f64 {
    ks_statistic(u, |x| x.clamp(0.0, 1.0))
}

/// Asymptotic critical value of the KS statistic at level 0.01 or 0.05.
pub fn ks_critical(n: usize, level: f64) -> f64 {
    let c = if level <= 0.01 { 1.6276 } else { 1.3581 };
    c / (n as f64).sqrt()
}
