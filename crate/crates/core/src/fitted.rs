//! Predictors and distribution parameters implied by coefficient draws.

use crate::design::{AssembledModel, Dataset, SparseRows};
use crate::families::{Family, ParamVector};
use crate::sampler::PosteriorStore;
use crate::{Error, Result};

/// Design rows of every block evaluated on one set of observations.
#[derive(Debug, Clone)]
pub struct PredictionDesign<'m> {
    model: &'m AssembledModel,
    rows: Vec<Vec<SparseRows>>,
    n: usize,
}

impl<'m> PredictionDesign<'m> {
    /// The training observations.
    pub fn training(model: &'m AssembledModel) -> Self {
        let rows = model
            .predictors
            .iter()
            .map(|p| p.blocks.iter().map(|b| b.raw_design().clone()).collect())
            .collect();
        Self {
            model,
            rows,
            n: model.n_obs(),
        }
    }

    /// New observations; spline covariates outside the training range are
    /// an error unless `allow_extrapolation` is set.
    pub fn new(model: &'m AssembledModel, data: &Dataset, allow_extrapolation: bool) -> Result<Self> {
        let rows = model
            .predictors
            .iter()
            .map(|p| {
                p.blocks
                    .iter()
                    .map(|b| b.design_rows(data, allow_extrapolation))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model,
            rows,
            n: data.n_rows(),
        })
    }

    pub fn model(&self) -> &'m AssembledModel {
        self.model
    }

    pub fn family(&self) -> Family {
        self.model.family
    }

    pub fn n_obs(&self) -> usize {
        self.n
    }

    /// Predictors per parameter for coefficients laid out as in a
    /// [`PosteriorStore`] draw.
    pub fn eta(&self, coefs: &[f64]) -> Result<Vec<Vec<f64>>> {
        let width: usize = self.model.predictors.iter().map(|p| p.dim()).sum();
        if coefs.len() != width {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a model with {width}",
                coefs.len()
            )));
        }
        let mut off = 0;
        let mut out = Vec::with_capacity(self.rows.len());
        for (pred, rows) in self.model.predictors.iter().zip(&self.rows) {
            let mut eta = vec![0.0; self.n];
            for (blk, z) in pred.blocks.iter().zip(rows) {
                let d = blk.dim();
                z.add_mul_to(&blk.expand(&coefs[off..off + d]), &mut eta);
                off += d;
            }
            out.push(eta);
        }
        Ok(out)
    }

    /// Parameter vectors per observation and the number of clamped
    /// predictor values.
    pub fn params(&self, coefs: &[f64]) -> Result<(Vec<ParamVector>, usize)> {
        let eta = self.eta(coefs)?;
        let fam = self.family();
        let mut buf = vec![0.0; fam.n_params()];
        let mut clamps = 0;
        let params = (0..self.n)
            .map(|i| {
                for (k, e) in buf.iter_mut().enumerate() {
                    *e = eta[k][i];
                }
                let (p, c) = fam.params_from_eta(&buf);
                clamps += c;
                p
            })
            .collect();
        Ok((params, clamps))
    }

    /// Plug-in parameters at the posterior-mean coefficients.
    pub fn posterior_mean_params(&self, store: &PosteriorStore) -> Result<Vec<ParamVector>> {
        if store.n_draws() == 0 {
            return Err(Error::invalid("posterior store holds no draws"));
        }
        Ok(self.params(&store.posterior_mean())?.0)
    }

    /// Parameters of retained draw `t`.
    pub fn draw_params(&self, store: &PosteriorStore, t: usize) -> Result<Vec<ParamVector>> {
        let draw = store.draw(t).to_vec();
        Ok(self.params(&draw)?.0)
    }
}

/// Rows whose spline covariates all lie inside the training ranges.
pub fn rows_in_range(model: &AssembledModel, data: &Dataset) -> Result<Vec<bool>> {
    let mut ok = vec![true; data.n_rows()];
    for b in model.predictors.iter().flat_map(|p| &p.blocks) {
        for (o, r) in ok.iter_mut().zip(b.rows_in_range(data)?) {
            *o &= r;
        }
    }
    Ok(ok)
}
