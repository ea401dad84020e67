use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;

use super::bands::CurveSamples;
use super::moments::family_moments_gini;
use crate::design::{AssembledModel, Basis, Dataset};
use crate::families::{Family, ParamVector};
use crate::fitted::PredictionDesign;
use crate::sampler::PosteriorStore;
use crate::{Error, Result};

pub const DENSITY_GRID_POINTS: usize = 512;

/// Equidistant grid from the 0.001 to the 0.999 quantile.
pub fn default_density_grid(fam: Family, theta: &ParamVector) -> Result<Vec<f64>> {
    let lo = fam.quantile(0.001, theta)?;
    let hi = fam.quantile(0.999, theta)?;
    Ok(linspace(lo, hi, DENSITY_GRID_POINTS))
}

/// Predictive densities at one covariate profile.
#[derive(Debug, Clone)]
pub struct DensityCurve {
    /// Density of every retained draw on the grid.
    pub samples: CurveSamples,
    /// Average of the per-draw densities.
    pub mean: Vec<f64>,
    /// Parameters at the posterior-mean coefficients.
    pub plug_in_params: ParamVector,
    /// Density at `plug_in_params`.
    pub plug_in: Vec<f64>,
}

impl DensityCurve {
    pub fn grid(&self) -> &[f64] {
        self.samples.grid()
    }
}

/// Posterior-mean density over `grid` (default: [`default_density_grid`]
/// at the plug-in parameters) for the single-row covariate `profile`.
pub fn posterior_mean_density(
    model: &AssembledModel,
    store: &PosteriorStore,
    profile: &Dataset,
    grid: Option<Vec<f64>>,
    allow_extrapolation: bool,
) -> Result<DensityCurve> {
    if profile.n_rows() != 1 {
        return Err(Error::invalid(format!("density profile must have one row, got {}", profile.n_rows())));
    }
    let design = PredictionDesign::new(model, profile, allow_extrapolation)?;
    let fam = model.family;
    let plug_in_params = design.posterior_mean_params(store)?[0];
    let grid = match grid {
        Some(g) => g,
        None => default_density_grid(fam, &plug_in_params)?,
    };
    let density = |theta: &ParamVector| -> Vec<f64> { grid.iter().map(|&y| fam.density(y, theta).unwrap_or(0.0)).collect() };
    let rows: Vec<Vec<f64>> = (0..store.n_draws())
        .into_par_iter()
        .map(|t| Ok(density(&design.draw_params(store, t)?[0])))
        .collect::<Result<_>>()?;
    let values = Array2::from_shape_fn((rows.len(), grid.len()), |(t, g)| rows[t][g]);
    let plug_in = density(&plug_in_params);
    let samples = CurveSamples::new(grid, values)?;
    Ok(DensityCurve {
        mean: samples.mean(),
        samples,
        plug_in_params,
        plug_in,
    })
}

/// Posterior draws of one block's effect.
#[derive(Debug, Clone)]
pub struct EffectSamples {
    pub label: String,
    /// Covariate on the grid axis.
    pub covariate: String,
    /// Level labels when the grid enumerates groups or regions (1, 2, ...).
    pub levels: Option<Vec<String>>,
    pub samples: CurveSamples,
}

/// Draws of the effect of block `block` of parameter `param`.
///
/// Smooth terms are evaluated on `n_grid` equidistant points spanning the
/// training range (varying coefficients without the interaction factor);
/// random and spatial effects give one value per level.
pub fn effect_samples(
    model: &AssembledModel,
    store: &PosteriorStore,
    param: usize,
    block: usize,
    n_grid: usize,
) -> Result<EffectSamples> {
    let pred = model
        .predictors
        .get(param)
        .ok_or_else(|| Error::invalid(format!("no predictor with index {param}")))?;
    let blk = pred
        .blocks
        .get(block)
        .ok_or_else(|| Error::invalid(format!("predictor {} has no block {block}", pred.param)))?;
    let draws = store.block_draws(param, block);
    let (covariate, levels, grid, rows) = match blk.basis() {
        Basis::Fixed { .. } => {
            return Err(Error::invalid(format!("block '{}' has no curve to evaluate", blk.label())));
        }
        Basis::Levels { column, labels } => {
            let grid = (1..=labels.len()).map(|i| i as f64).collect();
            (column.clone(), Some(labels.clone()), grid, None)
        }
        basis => {
            if n_grid < 2 {
                return Err(Error::invalid("effect grid needs at least two points"));
            }
            let (column, lo, hi) = blk.covariate_range().expect("spline basis");
            let grid = linspace(lo, hi, n_grid);
            let mut data = Dataset::new().with_numeric(column, grid.clone())?;
            if let Basis::Varying { by, .. } = basis {
                data = data.with_numeric(by.clone(), vec![1.0; n_grid])?;
            }
            (column.to_string(), None, grid, Some(blk.design_rows(&data, false)?))
        }
    };
    let curves: Vec<Vec<f64>> = draws
        .rows()
        .into_iter()
        .map(|g| {
            let beta = blk.expand(&g.to_vec());
            match &rows {
                Some(z) => z.mul_vec(&beta),
                None => beta,
            }
        })
        .collect();
    let values = Array2::from_shape_fn((curves.len(), grid.len()), |(t, g)| curves[t][g]);
    Ok(EffectSamples {
        label: blk.label().to_string(),
        covariate,
        levels,
        samples: CurveSamples::new(grid, values)?,
    })
}

/// A scalar functional of the conditional response distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivedQuantity {
    Mean,
    Sd,
    Gini,
    Quantile(f64),
}

impl DerivedQuantity {
    pub fn evaluate(self, fam: Family, theta: &ParamVector) -> Result<f64> {
        match self {
            DerivedQuantity::Mean => Ok(family_moments_gini(fam, theta)?.mean),
            DerivedQuantity::Sd => family_moments_gini(fam, theta)?
                .sd
                .ok_or_else(|| Error::UndefinedMoment(format!("{fam} variance at {:?}", theta.as_slice()))),
            DerivedQuantity::Gini => Ok(family_moments_gini(fam, theta)?.gini),
            DerivedQuantity::Quantile(p) => fam.quantile(p, theta),
        }
    }
}

impl fmt::Display for DerivedQuantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DerivedQuantity::Mean => f.write_str("mean"),
            DerivedQuantity::Sd => f.write_str("sd"),
            DerivedQuantity::Gini => f.write_str("gini"),
            DerivedQuantity::Quantile(p) => write!(f, "q{p}"),
        }
    }
}

impl FromStr for DerivedQuantity {
    type Err = Error;

    /// `mean`, `sd`, `gini` or `q<p>` such as `q0.9`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(DerivedQuantity::Mean),
            "sd" => Ok(DerivedQuantity::Sd),
            "gini" => Ok(DerivedQuantity::Gini),
            _ => {
                let p: f64 = s
                    .strip_prefix('q')
                    .and_then(|p| p.parse().ok())
                    .ok_or_else(|| Error::invalid(format!("unknown derived quantity '{s}'")))?;
                if p > 0.0 && p < 1.0 {
                    Ok(DerivedQuantity::Quantile(p))
                } else {
                    Err(Error::InvalidProbability(p))
                }
            }
        }
    }
}

/// Per-draw values of `quantity` at every row of `design` (draws × rows).
pub fn derived_samples(design: &PredictionDesign<'_>, store: &PosteriorStore, quantity: DerivedQuantity) -> Result<Array2<f64>> {
    let fam = design.family();
    let rows: Vec<Vec<f64>> = (0..store.n_draws())
        .into_par_iter()
        .map(|t| {
            design
                .draw_params(store, t)?
                .iter()
                .map(|theta| quantity.evaluate(fam, theta))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(Array2::from_shape_fn((rows.len(), design.n_obs()), |(t, i)| rows[t][i]))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { hi } else { lo + i as f64 * h }).collect()
}
