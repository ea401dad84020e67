use ndarray::{Array2, ArrayView1};

use crate::{Error, Result};

/// Posterior draws of a function on a grid (draws × grid points).
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSamples {
    grid: Vec<f64>,
    values: Array2<f64>,
}

impl CurveSamples {
    pub fn new(grid: Vec<f64>, values: Array2<f64>) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} grid points but {} columns of draws",
                grid.len(),
                values.ncols()
            )));
        }
        if grid.iter().any(|g| !g.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("curve grid must be finite and strictly increasing"));
        }
        if let Some(((t, g), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite curve value at draw {t}, grid point {g}")));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_draws(&self) -> usize {
        self.values.nrows()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.values.columns().into_iter().map(|c| mean(c.iter().copied())).collect()
    }

    /// Mean, median and equal-tailed interval at every grid point.
    pub fn pointwise(&self, level: f64) -> Result<Vec<DerivedSummary>> {
        self.values
            .columns()
            .into_iter()
            .map(|c| summarize_scalar(c.as_slice().map_or_else(|| c.to_vec(), <[f64]>::to_vec), level))
            .collect()
    }
}

/// Posterior mean, median and equal-tailed credible interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedSummary {
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

/// Summarises scalar draws at credible level `level`.
pub fn summarize_scalar(mut draws: Vec<f64>, level: f64) -> Result<DerivedSummary> {
    check_level(level)?;
    if draws.is_empty() {
        return Err(Error::invalid("no draws to summarise"));
    }
    if draws.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite draw in summary".into()));
    }
    let m = mean(draws.iter().copied());
    draws.sort_unstable_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(DerivedSummary {
        mean: m,
        median: quantile_sorted(&draws, 0.5),
        lower: quantile_sorted(&draws, tail),
        upper: quantile_sorted(&draws, 1.0 - tail),
        level,
    })
}

/// Credible band around the pointwise posterior mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub grid: Vec<f64>,
    pub center: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    /// Common multiplier of the pointwise standard deviation; `None` for
    /// pointwise bands.
    pub critical: Option<f64>,
    /// Grid points with zero posterior spread, left out of the maximum.
    pub excluded: Vec<usize>,
}

impl Band {
    /// Fraction of the sampled curves lying inside the band everywhere.
    pub fn coverage(&self, curves: &CurveSamples) -> f64 {
        let inside = curves.values.rows().into_iter().filter(|r| self.contains(r.view())).count();
        inside as f64 / curves.n_draws() as f64
    }

    pub fn contains(&self, curve: ArrayView1<'_, f64>) -> bool {
        curve
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }
}

const MIN_BAND_DRAWS: usize = 100;

struct Scaled {
    center: Vec<f64>,
    sd: Vec<f64>,
    excluded: Vec<usize>,
}

fn scale(curves: &CurveSamples) -> Scaled {
    let center = curves.mean();
    let t = curves.n_draws() as f64;
    let sd: Vec<f64> = curves
        .values
        .columns()
        .into_iter()
        .zip(&center)
        .map(|(c, m)| (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (t - 1.0)).sqrt())
        .collect();
    let excluded = sd
        .iter()
        .zip(&center)
        .enumerate()
        .filter(|(_, (s, m))| **s <= 1e-12 * (1.0 + m.abs()))
        .map(|(g, _)| g)
        .collect();
    Scaled { center, sd, excluded }
}

fn check_band_input(curves: &CurveSamples, level: f64) -> Result<()> {
    check_level(level)?;
    if curves.n_draws() < MIN_BAND_DRAWS {
        return Err(Error::invalid(format!(
            "credible bands need at least {MIN_BAND_DRAWS} draws, got {}",
            curves.n_draws()
        )));
    }
    Ok(())
}

// smallest order statistic covering a `level` fraction of the values
fn covering_quantile(mut v: Vec<f64>, level: f64) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    let k = ((level * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[k - 1]
}

fn build_band(curves: &CurveSamples, s: Scaled, level: f64, critical: Vec<f64>, scalar: Option<f64>) -> Band {
    // a few ulps of slack keep the draw that sets the critical value inside
    let half = |m: f64, sd: f64, q: f64| q * sd + 4.0 * f64::EPSILON * (m.abs() + q * sd);
    let lower = s.center.iter().zip(&s.sd).zip(&critical).map(|((m, sd), q)| m - half(*m, *sd, *q)).collect();
    let upper = s.center.iter().zip(&s.sd).zip(&critical).map(|((m, sd), q)| m + half(*m, *sd, *q)).collect();
    Band {
        grid: curves.grid.clone(),
        center: s.center,
        lower,
        upper,
        level,
        critical: scalar,
        excluded: s.excluded,
    }
}

/// Simultaneous band from scaled maximum deviations: with pointwise mean
/// m(g) and standard deviation s(g), q* is the `level` quantile over draws
/// of max_g |f(g) − m(g)|/s(g) and the band is m ± q*·s. At least a
/// `level` fraction of the sampled curves lie entirely inside it.
pub fn simultaneous_band(curves: &CurveSamples, level: f64) -> Result<Band> {
    check_band_input(curves, level)?;
    let s = scale(curves);
    let maxdev: Vec<f64> = curves
        .values
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(g, _)| s.excluded.binary_search(g).is_err())
                .map(|(g, v)| (v - s.center[g]).abs() / s.sd[g])
                .fold(0.0, f64::max)
        })
        .collect();
    let q = covering_quantile(maxdev, level);
    let critical = vec![q; curves.grid.len()];
    Ok(build_band(curves, s, level, critical, Some(q)))
}

/// Pointwise analogue of [`simultaneous_band`]: the scaled-deviation
/// quantile is taken separately at every grid point.
pub fn pointwise_band(curves: &CurveSamples, level: f64) -> Result<Band> {
    check_band_input(curves, level)?;
    let s = scale(curves);
    let critical: Vec<f64> = (0..curves.grid.len())
        .map(|g| {
            if s.excluded.binary_search(&g).is_ok() {
                return 0.0;
            }
            let col = curves.values.column(g);
            covering_quantile(col.iter().map(|v| (v - s.center[g]).abs() / s.sd[g]).collect(), level)
        })
        .collect();
    Ok(build_band(curves, s, level, critical, None))
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(level))
    }
}

fn mean(it: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = it.len() as f64;
    it.sum::<f64>() / n
}

// linear interpolation between order statistics
fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}
