use rand::Rng;

use crate::families::{Family, ParamVector};
use crate::quadrature::{integrate_positive_half_line, QuadOptions};
use crate::special::{ln_gamma, normal_cdf};
use crate::{Error, Result};

/// E[y^r] of the Dagum distribution, finite only for r < a.
pub fn dagum_raw_moment(theta: &ParamVector, r: f64) -> Result<f64> {
    Family::Dagum.validate(theta)?;
    let (a, b, c) = (theta[0], theta[1], theta[2]);
    if r >= a {
        return Err(Error::UndefinedMoment(format!("E[y^{r}] needs a > {r}, got a = {a}")));
    }
    let ln = r * b.ln() + ln_gamma(c + r / a) + ln_gamma(1.0 - r / a) - ln_gamma(c);
    Ok(ln.exp())
}

/// Mean and standard deviation of the Dagum distribution.
pub fn dagum_moments(theta: &ParamVector) -> Result<(f64, f64)> {
    let mean = dagum_raw_moment(theta, 1.0)?;
    let second = dagum_raw_moment(theta, 2.0)?;
    Ok((mean, (second - mean * mean).max(0.0).sqrt()))
}

/// Gini coefficient of the Dagum distribution. Free of the scale `b`.
pub fn dagum_gini(theta: &ParamVector) -> Result<f64> {
    Family::Dagum.validate(theta)?;
    let (a, c) = (theta[0], theta[2]);
    if a <= 1.0 {
        return Err(Error::UndefinedMoment(format!("Gini needs a > 1, got a = {a}")));
    }
    let ln = ln_gamma(c) + ln_gamma(2.0 * c + 1.0 / a) - ln_gamma(2.0 * c) - ln_gamma(c + 1.0 / a);
    Ok(ln.exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSummary {
    pub mean: f64,
    /// `None` when the variance does not exist.
    pub sd: Option<f64>,
    pub gini: f64,
}

/// Mean, standard deviation and Gini coefficient of a family at `theta`.
///
/// Fails with [`Error::UndefinedMoment`] when the mean does not exist.
pub fn family_moments_gini(fam: Family, theta: &ParamVector) -> Result<DistributionSummary> {
    fam.validate(theta)?;
    let (p0, p1) = (theta[0], theta[1]);
    match fam {
        Family::LogNormal => {
            let s2 = p1;
            Ok(DistributionSummary {
                mean: (p0 + 0.5 * s2).exp(),
                sd: Some((s2.exp_m1() * (2.0 * p0 + s2).exp()).sqrt()),
                gini: 2.0 * normal_cdf((s2 / 2.0).sqrt()) - 1.0,
            })
        }
        Family::Gamma => Ok(DistributionSummary {
            mean: p0,
            sd: Some(p0 / p1.sqrt()),
            gini: (ln_gamma(p1 + 0.5) - ln_gamma(p1 + 1.0)).exp() / std::f64::consts::PI.sqrt(),
        }),
        Family::InverseGaussian => Ok(DistributionSummary {
            mean: p0,
            sd: Some((p1 * p0.powi(3)).sqrt()),
            gini: integrated_gini(fam, theta, p0)?,
        }),
        Family::Dagum => {
            let mean = dagum_raw_moment(theta, 1.0)?;
            let sd = dagum_moments(theta).ok().map(|m| m.1);
            Ok(DistributionSummary {
                mean,
                sd,
                gini: dagum_gini(theta)?,
            })
        }
    }
}

// Gini = (1/mean) ∫ F(y)(1 − F(y)) dy
fn integrated_gini(fam: Family, theta: &ParamVector, mean: f64) -> Result<f64> {
    let median = fam.quantile(0.5, theta)?;
    let integral = integrate_positive_half_line(
        |y| {
            let f = fam.cdf(y, theta).unwrap_or(1.0);
            f * (1.0 - f)
        },
        median,
        QuadOptions::default(),
    )?;
    Ok(integral / mean)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloGini {
    pub gini: f64,
    /// Standard error from independent batches.
    pub se: f64,
}

/// Gini coefficient from the empirical Lorenz curve of `n` simulated
/// values, with a batch-means standard error over `batches` batches.
pub fn lorenz_gini_mc<R: Rng + ?Sized>(
    fam: Family,
    theta: &ParamVector,
    n: usize,
    batches: usize,
    rng: &mut R,
) -> Result<MonteCarloGini> {
    if batches < 2 || n < 2 * batches {
        return Err(Error::invalid(format!("need at least two batches of two draws, got n = {n}, batches = {batches}")));
    }
    let mut y = (0..n).map(|_| fam.sample(theta, rng)).collect::<Result<Vec<f64>>>()?;
    let size = n / batches;
    let per_batch: Vec<f64> = y.chunks_mut(size).take(batches).map(sample_gini).collect();
    let gini = sample_gini(&mut y);
    let m = per_batch.iter().sum::<f64>() / batches as f64;
    let var = per_batch.iter().map(|g| (g - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(MonteCarloGini {
        gini,
        se: (var / batches as f64).sqrt(),
    })
}

// 2 Σ i·y_(i) / (n Σ y) − (n + 1)/n
fn sample_gini(y: &mut [f64]) -> f64 {
    y.sort_unstable_by(f64::total_cmp);
    let n = y.len() as f64;
    let (mut weighted, mut total) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        weighted += (i + 1) as f64 * v;
        total += v;
    }
    2.0 * weighted / (n * total) - (n + 1.0) / n
}
