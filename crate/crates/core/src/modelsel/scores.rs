use crate::families::{Family, ParamVector};
use crate::quadrature::{integrate, integrate_positive_half_line, integrate_to_infinity_scaled, GaussLegendre, QuadOptions};
use crate::special::{ln_beta, ln_gamma};
use crate::{Error, Result};

/// Nodes of the fixed Gauss–Legendre rule for the quantile form of CRPS.
pub const CRPS_NODES: usize = 256;

fn quad_opts() -> QuadOptions {
    QuadOptions {
        rel_tol: 1e-10,
        abs_tol: 1e-14,
        max_intervals: 4000,
    }
}

/// A predictive distribution: a single parameter vector (plug-in) or an
/// equally weighted mixture over posterior draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictive {
    family: Family,
    components: Vec<ParamVector>,
}

impl Predictive {
    pub fn plug_in(family: Family, theta: ParamVector) -> Result<Self> {
        family.validate(&theta)?;
        Ok(Self {
            family,
            components: vec![theta],
        })
    }

    pub fn mixture(family: Family, draws: Vec<ParamVector>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        for d in &draws {
            family.validate(d)?;
        }
        Ok(Self {
            family,
            components: draws,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn components(&self) -> &[ParamVector] {
        &self.components
    }

    fn average(&self, f: impl Fn(&ParamVector) -> f64) -> f64 {
        self.components.iter().map(f).sum::<f64>() / self.components.len() as f64
    }

    pub fn density(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        self.average(|t| self.family.density_or_zero(y, t))
    }

    pub fn log_density(&self, y: f64) -> Result<f64> {
        match self.components.as_slice() {
            [t] => self.family.log_density(y, t),
            _ => {
                if !(y > 0.0 && y.is_finite()) {
                    return Err(Error::OutOfSupport {
                        family: self.family.name(),
                        value: y,
                    });
                }
                Ok(self.density(y).ln())
            }
        }
    }

    pub fn cdf(&self, y: f64) -> Result<f64> {
        match self.components.as_slice() {
            [t] => self.family.cdf(y, t),
            _ if y <= 0.0 => Ok(0.0),
            _ => Ok(self.average(|t| self.family.cdf_unchecked(y, t))),
        }
    }

    fn cdf_raw(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        self.average(|t| self.family.cdf_unchecked(y, t))
    }

    fn sf_raw(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        self.average(|t| self.family.sf_unchecked(y, t))
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        match self.components.as_slice() {
            [t] => self.family.quantile(p, t),
            comps => {
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::InvalidProbability(p));
                }
                // the mixture quantile lies between the component quantiles
                let mut lo = f64::INFINITY;
                let mut hi: f64 = 0.0;
                for t in comps {
                    let q = self.family.quantile(p, t)?;
                    lo = lo.min(q);
                    hi = hi.max(q);
                }
                if lo == hi {
                    return Ok(lo);
                }
                let (mut a, mut b) = (lo.ln(), hi.ln());
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if self.cdf_raw(m.exp()) < p {
                        a = m;
                    } else {
                        b = m;
                    }
                    if b - a < 1e-13 {
                        break;
                    }
                }
                Ok((0.5 * (a + b)).exp())
            }
        }
    }
}

/// ∫₀^∞ p(y)² dy; closed forms for log-normal, gamma and Dagum,
/// quadrature otherwise. Infinite integrals are an error.
pub fn integrated_squared_density(pred: &Predictive) -> Result<f64> {
    if let [t] = pred.components() {
        let p = t.as_slice();
        match pred.family() {
            Family::LogNormal => {
                let (mu, s2) = (p[0], p[1]);
                return Ok((-mu + s2 / 4.0).exp() / (2.0 * (s2 * std::f64::consts::PI).sqrt()));
            }
            Family::Gamma => {
                let (mu, sigma) = (p[0], p[1]);
                if sigma <= 0.5 {
                    return Err(Error::UndefinedMoment(format!(
                        "squared gamma density is not integrable for shape {sigma} <= 1/2"
                    )));
                }
                let ln = (sigma / mu).ln() + ln_gamma(2.0 * sigma - 1.0)
                    - 2.0 * ln_gamma(sigma)
                    - (2.0 * sigma - 1.0) * std::f64::consts::LN_2;
                return Ok(ln.exp());
            }
            Family::Dagum => {
                let (a, b, c) = (p[0], p[1], p[2]);
                let alpha = 2.0 * c - 1.0 / a;
                if alpha <= 0.0 {
                    return Err(Error::UndefinedMoment(format!(
                        "squared Dagum density is not integrable for 2c = {} <= 1/a = {}",
                        2.0 * c,
                        1.0 / a
                    )));
                }
                let ln = a.ln() + 2.0 * c.ln() - b.ln() + ln_beta(alpha, 2.0 + 1.0 / a);
                return Ok(ln.exp());
            }
            Family::InverseGaussian => {}
        }
    }
    let split = pred.quantile(0.5)?;
    let v = integrate_positive_half_line(|y| pred.density(y).powi(2), split, quad_opts())?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::UndefinedMoment("squared predictive density is not integrable".into()))
    }
}

/// LS = log p(y).
pub fn score_log(pred: &Predictive, y: f64) -> Result<f64> {
    pred.log_density(y)
}

/// QS = 2 p(y) − ∫p².
pub fn score_quadratic(pred: &Predictive, y: f64) -> Result<f64> {
    let p = pred.log_density(y)?.exp();
    Ok(2.0 * p - integrated_squared_density(pred)?)
}

/// SPS = p(y) / (∫p²)^{1/2}.
pub fn score_spherical(pred: &Predictive, y: f64) -> Result<f64> {
    let p = pred.log_density(y)?.exp();
    Ok(p / integrated_squared_density(pred)?.sqrt())
}

/// CRPS = −∫ (F(x) − 1{x ≥ y})² dx, evaluated from the cdf.
pub fn score_crps(pred: &Predictive, y: f64) -> Result<f64> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::OutOfSupport {
            family: pred.family().name(),
            value: y,
        });
    }
    let opts = quad_opts();
    let left = integrate(|x| pred.cdf_raw(x).powi(2), 0.0, y, opts);
    let scale = pred.quantile(0.75)?.max(y) - pred.quantile(0.25)?.min(y);
    let right = integrate_to_infinity_scaled(|x| pred.sf_raw(x).powi(2), y, scale.max(1e-300), opts);
    let v = left.value + right.value;
    if !(left.converged && right.converged && v.is_finite()) {
        return Err(Error::Numerical(format!("CRPS integral did not converge at y = {y}")));
    }
    Ok(-v)
}

/// Per-node contributions −2(1{y ≤ F⁻¹(α)} − α)(F⁻¹(α) − y) on `rule`.
pub fn crps_alpha_contributions(pred: &Predictive, y: f64, rule: &GaussLegendre) -> Result<Vec<f64>> {
    rule.nodes
        .iter()
        .map(|&alpha| {
            let q = pred.quantile(alpha)?;
            let ind = if y <= q { 1.0 } else { 0.0 };
            Ok(-2.0 * (ind - alpha) * (q - y))
        })
        .collect()
}

/// CRPS from its quantile decomposition on a fixed Gauss–Legendre rule.
pub fn score_crps_quantile(pred: &Predictive, y: f64, rule: &GaussLegendre) -> Result<f64> {
    let c = crps_alpha_contributions(pred, y, rule)?;
    Ok(c.iter().zip(&rule.weights).map(|(c, w)| c * w).sum())
}

/// The four scores of one observation; QS and SPS are `None` when ∫p² is
/// not finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationScores {
    pub ls: f64,
    pub qs: Option<f64>,
    pub sps: Option<f64>,
    pub crps: f64,
}

pub fn score_observation(pred: &Predictive, y: f64) -> Result<ObservationScores> {
    let ls = score_log(pred, y)?;
    let p = ls.exp();
    let (qs, sps) = match integrated_squared_density(pred) {
        Ok(i2) => (Some(2.0 * p - i2), Some(p / i2.sqrt())),
        Err(Error::UndefinedMoment(_)) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(ObservationScores {
        ls,
        qs,
        sps,
        crps: score_crps(pred, y)?,
    })
}

/// Observed responses with their predictive distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSet {
    pub family: Family,
    pub y: Vec<f64>,
    pub predictive: Vec<Predictive>,
}

impl PredictiveSet {
    /// Plug-in predictive distributions.
    pub fn plug_in(family: Family, y: Vec<f64>, params: &[ParamVector]) -> Result<Self> {
        if y.len() != params.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} responses and {} parameter vectors",
                y.len(),
                params.len()
            )));
        }
        let predictive = params
            .iter()
            .map(|t| Predictive::plug_in(family, *t))
            .collect::<Result<_>>()?;
        Ok(Self { family, y, predictive })
    }

    /// Posterior predictive mixtures; `draws[t][i]` is draw `t` for
    /// observation `i`.
    pub fn mixture(family: Family, y: Vec<f64>, draws: &[Vec<ParamVector>]) -> Result<Self> {
        let predictive = (0..y.len())
            .map(|i| Predictive::mixture(family, draws.iter().map(|d| d[i]).collect()))
            .collect::<Result<_>>()?;
        Ok(Self { family, y, predictive })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Predictive, f64)> {
        self.predictive.iter().zip(self.y.iter().copied())
    }
}

/// Averages of the four scores over a set of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSummary {
    pub n: usize,
    pub ls: f64,
    pub qs: f64,
    pub sps: f64,
    pub crps: f64,
    /// Observations whose QS and SPS are undefined and left out of those
    /// two averages.
    pub undefined_quadratic: usize,
    /// Sum over observations of the per-node CRPS contributions.
    pub alpha_sums: Vec<f64>,
}

/// Scores every observation; returns the per-observation scores and their
/// summary (with CRPS α-curve sums on `rule`).
pub fn score_set(set: &PredictiveSet, rule: &GaussLegendre) -> Result<(Vec<ObservationScores>, ScoreSummary)> {
    let mut per_obs = Vec::with_capacity(set.len());
    let mut alpha_sums = vec![0.0; rule.len()];
    for (pred, y) in set.iter() {
        per_obs.push(score_observation(pred, y)?);
        for (s, c) in alpha_sums.iter_mut().zip(crps_alpha_contributions(pred, y, rule)?) {
            *s += c;
        }
    }
    let n = per_obs.len();
    let mean = |v: Vec<f64>| {
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let qs: Vec<f64> = per_obs.iter().filter_map(|s| s.qs).collect();
    let sps: Vec<f64> = per_obs.iter().filter_map(|s| s.sps).collect();
    let summary = ScoreSummary {
        n,
        undefined_quadratic: n - qs.len(),
        ls: mean(per_obs.iter().map(|s| s.ls).collect()),
        qs: mean(qs),
        sps: mean(sps),
        crps: mean(per_obs.iter().map(|s| s.crps).collect()),
        alpha_sums,
    };
    Ok((per_obs, summary))
}
