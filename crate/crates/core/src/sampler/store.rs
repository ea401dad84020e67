use std::fmt::Write as _;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis, s};

use super::chain::{BlockStats, ChainState};
use crate::design::AssembledModel;
use crate::families::Family;
use crate::{Error, Result};

/// Position of one block's coefficients within a flattened draw.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSlot {
    pub param: usize,
    pub param_name: String,
    pub block: usize,
    pub label: String,
    pub offset: usize,
    pub dim: usize,
    pub coef_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSlot {
    pub param: usize,
    pub block: usize,
    pub name: String,
}

/// Diagnostics of one chain.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub family: Family,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub n_obs: usize,
    /// Per block, labelled `param.block`.
    pub stats: Vec<(String, BlockStats)>,
    pub clamp_events: u64,
    pub audits: usize,
    pub max_audit_diff: f64,
    pub elapsed_seconds: f64,
}

impl RunReport {
    /// Blocks whose acceptance rate is below 0.05.
    pub fn flagged_blocks(&self) -> Vec<&str> {
        self.stats
            .iter()
            .filter(|(_, s)| s.acceptance_rate() < 0.05)
            .map(|(l, _)| l.as_str())
            .collect()
    }

    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "family: {}", self.family);
        let _ = writeln!(out, "iterations: {}", self.iterations);
        let _ = writeln!(out, "burn_in: {}", self.burn_in);
        let _ = writeln!(out, "thin: {}", self.thin);
        let _ = writeln!(out, "seed: {}", self.seed);
        let _ = writeln!(out, "n_obs: {}", self.n_obs);
        for (label, s) in &self.stats {
            let _ = writeln!(out, "acceptance.{label}: {:.4}", s.acceptance_rate());
            let _ = writeln!(out, "aborted.{label}: {}", s.aborted);
            let _ = writeln!(out, "jittered.{label}: {}", s.jittered);
        }
        let _ = writeln!(out, "clamp_events: {}", self.clamp_events);
        let _ = writeln!(out, "audits: {}", self.audits);
        let _ = writeln!(out, "max_audit_diff: {:e}", self.max_audit_diff);
        let _ = writeln!(out, "low_acceptance: {}", self.flagged_blocks().join(","));
        let _ = writeln!(out, "elapsed_seconds: {:.3}", self.elapsed_seconds);
        out
    }
}

/// Retained draws of all coefficients and smoothing variances.
#[derive(Debug, Clone)]
pub struct PosteriorStore {
    family: Family,
    slots: Vec<BlockSlot>,
    variance_slots: Vec<VarianceSlot>,
    coefs: Array2<f64>,
    variances: Array2<f64>,
    deviance: Vec<f64>,
    report: Option<RunReport>,
}

pub(crate) fn layout(model: &AssembledModel) -> (Vec<BlockSlot>, Vec<VarianceSlot>) {
    let mut slots = Vec::new();
    let mut vars = Vec::new();
    let mut offset = 0;
    for (k, p) in model.predictors.iter().enumerate() {
        for (j, b) in p.blocks.iter().enumerate() {
            slots.push(BlockSlot {
                param: k,
                param_name: p.param.to_string(),
                block: j,
                label: b.label().to_string(),
                offset,
                dim: b.dim(),
                coef_names: b.coef_names().into_iter().map(|c| format!("{}.{c}", p.param)).collect(),
            });
            offset += b.dim();
            if b.is_penalized() {
                vars.push(VarianceSlot {
                    param: k,
                    block: j,
                    name: format!("{}.tau2[{}]", p.param, b.label()),
                });
            }
        }
    }
    (slots, vars)
}

impl PosteriorStore {
    /// Rebuilds a store from stored draws laid out for `model`.
    pub fn from_draws(
        model: &AssembledModel,
        coefs: Array2<f64>,
        variances: Array2<f64>,
        deviance: Vec<f64>,
    ) -> Result<Self> {
        let (slots, variance_slots) = layout(model);
        let width: usize = slots.iter().map(|s| s.dim).sum();
        if coefs.ncols() != width || variances.ncols() != variance_slots.len() {
            return Err(Error::DimensionMismatch(format!(
                "draws have {} coefficient and {} variance columns, model needs {width} and {}",
                coefs.ncols(),
                variances.ncols(),
                variance_slots.len()
            )));
        }
        if variances.nrows() != coefs.nrows() || deviance.len() != coefs.nrows() {
            return Err(Error::DimensionMismatch("draw counts differ between tables".into()));
        }
        Ok(Self {
            family: model.family,
            slots,
            variance_slots,
            coefs,
            variances,
            deviance,
            report: None,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n_draws(&self) -> usize {
        self.coefs.nrows()
    }

    pub fn slots(&self) -> &[BlockSlot] {
        &self.slots
    }

    pub fn slot(&self, param: usize, block: usize) -> &BlockSlot {
        self.slots
            .iter()
            .find(|s| s.param == param && s.block == block)
            .expect("block exists")
    }

    pub fn variance_slots(&self) -> &[VarianceSlot] {
        &self.variance_slots
    }

    /// Draws × coefficients.
    pub fn coefs(&self) -> ArrayView2<'_, f64> {
        self.coefs.view()
    }

    pub fn draw(&self, t: usize) -> ArrayView1<'_, f64> {
        self.coefs.row(t)
    }

    /// Draws × smoothing variances.
    pub fn variances(&self) -> ArrayView2<'_, f64> {
        self.variances.view()
    }

    /// Draws of one block's coefficients.
    pub fn block_draws(&self, param: usize, block: usize) -> ArrayView2<'_, f64> {
        let s = self.slot(param, block);
        self.coefs.slice(s![.., s.offset..s.offset + s.dim])
    }

    /// −2 × log-likelihood of each retained draw as recorded by the chain.
    pub fn deviance(&self) -> &[f64] {
        &self.deviance
    }

    pub fn report(&self) -> Option<&RunReport> {
        self.report.as_ref()
    }

    pub fn posterior_mean(&self) -> Vec<f64> {
        self.coefs
            .mean_axis(Axis(0))
            .map(|m| m.to_vec())
            .unwrap_or_else(|| vec![f64::NAN; self.coefs.ncols()])
    }

    pub fn coef_names(&self) -> Vec<String> {
        self.slots.iter().flat_map(|s| s.coef_names.iter().cloned()).collect()
    }

    /// Keeps only the listed draws.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut out = self.clone();
        out.coefs = self.coefs.select(Axis(0), rows);
        out.variances = self.variances.select(Axis(0), rows);
        out.deviance = rows.iter().map(|&r| self.deviance[r]).collect();
        out
    }
}

pub(crate) struct StoreBuilder {
    family: Family,
    slots: Vec<BlockSlot>,
    variance_slots: Vec<VarianceSlot>,
    coefs: Vec<f64>,
    variances: Vec<f64>,
    deviance: Vec<f64>,
}

impl StoreBuilder {
    pub(crate) fn new(model: &AssembledModel, capacity: usize) -> Self {
        let (slots, variance_slots) = layout(model);
        let width: usize = slots.iter().map(|s| s.dim).sum();
        Self {
            family: model.family,
            coefs: Vec::with_capacity(capacity * width),
            variances: Vec::with_capacity(capacity * variance_slots.len()),
            deviance: Vec::with_capacity(capacity),
            slots,
            variance_slots,
        }
    }

    pub(crate) fn push(&mut self, state: &ChainState) {
        for block in state.coefs.iter().flatten() {
            self.coefs.extend_from_slice(block);
        }
        for v in &self.variance_slots {
            self.variances.push(state.tau2[v.param][v.block]);
        }
        self.deviance.push(-2.0 * state.loglik);
    }

    pub(crate) fn finish(self, report: RunReport) -> PosteriorStore {
        let n = self.deviance.len();
        let width: usize = self.slots.iter().map(|s| s.dim).sum();
        PosteriorStore {
            family: self.family,
            coefs: Array2::from_shape_vec((n, width), self.coefs).expect("draw layout"),
            variances: Array2::from_shape_vec((n, self.variance_slots.len()), self.variances).expect("variance layout"),
            deviance: self.deviance,
            slots: self.slots,
            variance_slots: self.variance_slots,
            report: Some(report),
        }
    }
}
