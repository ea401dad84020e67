use crate::families::{Family, ParamVector};
use crate::fitted::PredictionDesign;
use crate::sampler::PosteriorStore;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DicResult {
    pub dic: f64,
    /// Effective number of parameters, mean deviance minus deviance at the
    /// posterior mean.
    pub pd: f64,
    pub mean_deviance: f64,
    pub deviance_at_mean: f64,
    pub n_draws: usize,
}

/// −2 log p(y_i | ϑ_i) per observation.
pub fn pointwise_deviance(family: Family, y: &[f64], params: &[ParamVector]) -> Result<Vec<f64>> {
    if y.len() != params.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} responses and {} parameter vectors",
            y.len(),
            params.len()
        )));
    }
    y.iter()
        .zip(params)
        .map(|(&yi, p)| Ok(-2.0 * family.log_density(yi, p)?))
        .collect()
}

/// −2 Σ log p(y_i | ϑ_i).
pub fn deviance(family: Family, y: &[f64], params: &[ParamVector]) -> Result<f64> {
    Ok(pointwise_deviance(family, y, params)?.iter().sum())
}

/// DIC = 2·mean D(θ) − D(θ̄), with θ̄ the mean of the retained coefficient
/// draws mapped through the predictors.
pub fn dic(design: &PredictionDesign<'_>, store: &PosteriorStore, y: &[f64]) -> Result<DicResult> {
    let t = store.n_draws();
    if t < 2 {
        return Err(Error::invalid(format!("DIC needs at least two retained draws, got {t}")));
    }
    let family = design.family();
    let mut total = 0.0;
    for s in 0..t {
        total += deviance(family, y, &design.draw_params(store, s)?)?;
    }
    let mean_deviance = total / t as f64;
    let at_mean = design.posterior_mean_params(store)?;
    let point = pointwise_deviance(family, y, &at_mean)?;
    if let Some(i) = point.iter().position(|d| !d.is_finite()) {
        return Err(Error::Numerical(format!(
            "deviance at the posterior mean is not finite at observation {i}"
        )));
    }
    let deviance_at_mean: f64 = point.iter().sum();
    let pd = mean_deviance - deviance_at_mean;
    Ok(DicResult {
        dic: mean_deviance + pd,
        pd,
        mean_deviance,
        deviance_at_mean,
        n_draws: t,
    })
}
