//! Simulation studies: data drawn from a known distributional regression,
//! refitted under each candidate model.
//!
//! ```toml
//! [simulation]
//! family = "gamma"
//! n = 1000
//! replicates = 10
//! covariates.x = { dist = "uniform" }
//! truth.mu = { intercept = 0.5, terms = [{ function = "sine", column = "x", scale = 0.5 }] }
//! truth.sigma = { intercept = 1.1 }
//! candidates = [
//!   { family = "gamma", location = { terms = [{ type = "pspline", column = "x" }] } },
//!   { family = "lognormal", location = { terms = [{ type = "pspline", column = "x" }] } },
//! ]
//! ```
//!
//! Truth terms add `scale · f(x)` to the predictor of their parameter, with
//! `f` one of `linear` (x), `sine` (sin 2πx), `cosine` (cos 2πx), `quadratic`
//! (x²), `bump` (exp(−50(x − ½)²)) and `step` (1 for x > ½).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use distreg_core::derived::effect_samples;
use distreg_core::design::{assemble_predictors, Basis, Column, Dataset, ModelSpec, PredictorSpec};
use distreg_core::fitted::PredictionDesign;
use distreg_core::modelsel::{dic, DicResult};
use distreg_core::sampler::{run_chain, SamplerConfig};
use distreg_core::Family;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Source;
use crate::error::{CliError, Result};

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn ten() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateDist {
    Uniform {
        #[serde(default)]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
    },
    Normal {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        sd: f64,
    },
    /// 0/1 indicator.
    Binary {
        #[serde(default = "half")]
        p: f64,
    },
    /// Categorical labels `g1`, …, `g<levels>` with equal probabilities.
    Groups { levels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    Linear,
    Sine,
    Cosine,
    Quadratic,
    Bump,
    Step,
}

impl TestFunction {
    pub fn eval(self, x: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            TestFunction::Linear => x,
            TestFunction::Sine => (2.0 * PI * x).sin(),
            TestFunction::Cosine => (2.0 * PI * x).cos(),
            TestFunction::Quadratic => x * x,
            TestFunction::Bump => (-50.0 * (x - 0.5).powi(2)).exp(),
            TestFunction::Step => f64::from(u8::from(x > 0.5)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthTerm {
    pub function: TestFunction,
    pub column: String,
    #[serde(default = "one")]
    pub scale: f64,
}

/// True predictor of one parameter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthPredictor {
    #[serde(default)]
    pub intercept: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<TruthTerm>,
}

/// Candidate model. `location` is shorthand for the predictor of the
/// family's location parameter; parameters without a predictor get an
/// intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Candidate {
    pub family: Family,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub predictors: BTreeMap<String, PredictorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<PredictorSpec>,
}

impl Candidate {
    pub fn model_spec(&self) -> ModelSpec {
        let mut spec = ModelSpec::intercept_only(self.family);
        if let Some(loc) = &self.location {
            let name = self.family.param_names()[self.family.location_index()];
            spec = spec.with_predictor(name, loc.clone());
        }
        for (k, p) in &self.predictors {
            spec = spec.with_predictor(k, p.clone());
        }
        spec
    }

    pub fn name(&self, index: usize) -> String {
        format!("{}#{}", self.family, index + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationScenario {
    /// Generating family.
    pub family: Family,
    pub n: usize,
    #[serde(default = "ten")]
    pub replicates: usize,
    pub covariates: BTreeMap<String, CovariateDist>,
    pub truth: BTreeMap<String, TruthPredictor>,
    pub candidates: Vec<Candidate>,
}

impl SimulationScenario {
    pub(crate) fn validate(&self, src: &Source) -> Result<()> {
        if self.n < 10 {
            return Err(src.error("simulation.n", "needs at least 10 observations"));
        }
        if self.replicates == 0 {
            return Err(src.error("simulation.replicates", "needs at least one replicate"));
        }
        for (name, dist) in &self.covariates {
            let key = format!("simulation.covariates.{name}");
            let ok = match *dist {
                CovariateDist::Uniform { lo, hi } => lo < hi,
                CovariateDist::Normal { sd, .. } => sd > 0.0,
                CovariateDist::Binary { p } => p > 0.0 && p < 1.0,
                CovariateDist::Groups { levels } => levels >= 2,
            };
            if !ok {
                return Err(src.error(&key, "invalid distribution parameters"));
            }
        }
        let names = self.family.param_names();
        for key in self.truth.keys() {
            if !names.contains(&key.as_str()) {
                return Err(src.error(
                    &format!("simulation.truth.{key}"),
                    format!("not a parameter of the {} family (expected {})", self.family, names.join(", ")),
                ));
            }
        }
        for (param, truth) in &self.truth {
            for (i, t) in truth.terms.iter().enumerate() {
                match self.covariates.get(&t.column) {
                    None => {
                        return Err(src.error(
                            &format!("simulation.truth.{param}.terms[{i}]"),
                            format!("unknown covariate '{}'", t.column),
                        ))
                    }
                    Some(CovariateDist::Groups { .. }) => {
                        return Err(src.error(
                            &format!("simulation.truth.{param}.terms[{i}]"),
                            format!("covariate '{}' is categorical", t.column),
                        ))
                    }
                    Some(_) => {}
                }
            }
        }
        if self.candidates.is_empty() {
            return Err(src.error("simulation.candidates", "needs at least one candidate"));
        }
        for (i, c) in self.candidates.iter().enumerate() {
            let key = format!("simulation.candidates[{i}]");
            c.model_spec().ordered().map_err(|e| src.error(&key, e))?;
            for col in c.model_spec().columns() {
                if !self.covariates.contains_key(&col) {
                    return Err(src.error(&key, format!("unknown covariate '{col}'")));
                }
            }
        }
        Ok(())
    }

    /// Covariates and responses of replicate `r`.
    pub fn generate(&self, seed: u64, r: usize) -> Result<(Dataset, Vec<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let n = self.n;
        let mut data = Dataset::new();
        for (name, dist) in &self.covariates {
            let res = match *dist {
                CovariateDist::Uniform { lo, hi } => data.insert(
                    name.clone(),
                    Column::Numeric((0..n).map(|_| rng.random_range(lo..hi)).collect()),
                ),
                CovariateDist::Normal { mean, sd } => data.insert(
                    name.clone(),
                    Column::Numeric(
                        (0..n)
                            .map(|_| mean + sd * rng.sample::<f64, _>(StandardNormal))
                            .collect(),
                    ),
                ),
                CovariateDist::Binary { p } => data.insert(
                    name.clone(),
                    Column::Numeric((0..n).map(|_| f64::from(u8::from(rng.random_bool(p)))).collect()),
                ),
                CovariateDist::Groups { levels } => data.insert(
                    name.clone(),
                    Column::Categorical(
                        (0..n).map(|_| format!("g{}", rng.random_range(1..=levels))).collect(),
                    ),
                ),
            };
            res.map_err(|e| CliError::data(e.to_string()))?;
        }
        let fam = self.family;
        let mut eta = vec![vec![0.0; fam.n_params()]; n];
        for (k, name) in fam.param_names().iter().enumerate() {
            let truth = self.truth.get(*name).cloned().unwrap_or_default();
            let mut col = vec![truth.intercept; n];
            for t in &truth.terms {
                let x = data.numeric(&t.column).map_err(|e| CliError::data(e.to_string()))?;
                for (c, &xi) in col.iter_mut().zip(x) {
                    *c += t.scale * t.function.eval(xi);
                }
            }
            for (e, v) in eta.iter_mut().zip(col) {
                e[k] = v;
            }
        }
        let y = eta
            .iter()
            .map(|e| fam.sample(&fam.params_from_eta(e).0, &mut rng))
            .collect::<distreg_core::Result<Vec<f64>>>()
            .map_err(|e| CliError::numeric(e.to_string()))?;
        Ok((data, y))
    }

    /// Sum of the true terms of parameter `param` on `column`, at `x`.
    fn truth_curve(&self, param: &str, column: &str, x: f64) -> f64 {
        self.truth
            .get(param)
            .map(|t| {
                t.terms
                    .iter()
                    .filter(|term| term.column == column)
                    .map(|term| term.scale * term.function.eval(x))
                    .sum()
            })
            .unwrap_or(0.0)
    }

    fn has_truth(&self, param: &str, column: &str) -> bool {
        self.truth
            .get(param)
            .is_some_and(|t| t.terms.iter().any(|term| term.column == column))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateFit {
    pub candidate: usize,
    pub family: Family,
    pub result: std::result::Result<DicResult, String>,
}

/// Recovery of one smooth effect of the generating family.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectRecovery {
    pub candidate: usize,
    pub param: String,
    pub term: String,
    pub rmse: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateReport {
    pub replicate: usize,
    pub fits: Vec<CandidateFit>,
    pub effects: Vec<EffectRecovery>,
    /// Set when the data of this replicate could not be generated.
    pub error: Option<String>,
}

impl ReplicateReport {
    /// Candidate with the lowest DIC among successful fits.
    pub fn best(&self) -> Option<usize> {
        self.fits
            .iter()
            .filter_map(|f| f.result.as_ref().ok().map(|d| (f.candidate, d.dic)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(c, _)| c)
    }

    /// 1-based DIC rank of each successful candidate.
    pub fn ranks(&self) -> BTreeMap<usize, usize> {
        let mut ok: Vec<(usize, f64)> = self
            .fits
            .iter()
            .filter_map(|f| f.result.as_ref().ok().map(|d| (f.candidate, d.dic)))
            .collect();
        ok.sort_by(|a, b| a.1.total_cmp(&b.1));
        ok.into_iter().enumerate().map(|(r, (c, _))| (c, r + 1)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub candidates: Vec<String>,
    pub truth: Family,
    pub replicates: Vec<ReplicateReport>,
}

impl SimulationReport {
    /// Replicates in which each candidate had the lowest DIC.
    pub fn selection_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.candidates.len()];
        for r in &self.replicates {
            if let Some(b) = r.best() {
                counts[b] += 1;
            }
        }
        counts
    }

    pub fn failures(&self) -> usize {
        self.replicates
            .iter()
            .map(|r| usize::from(r.error.is_some()) + r.fits.iter().filter(|f| f.result.is_err()).count())
            .sum()
    }

    /// `replicate,candidate,family,dic,pd,rank,status`.
    pub fn dic_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for r in &self.replicates {
            let ranks = r.ranks();
            for f in &r.fits {
                let (dic, pd, status) = match &f.result {
                    Ok(d) => (d.dic.to_string(), d.pd.to_string(), "ok".to_string()),
                    Err(e) => ("NaN".into(), "NaN".into(), e.clone()),
                };
                let rank = ranks.get(&f.candidate).map_or("NaN".into(), |r| r.to_string());
                rows.push(vec![
                    (r.replicate + 1).to_string(),
                    self.candidates[f.candidate].clone(),
                    f.family.to_string(),
                    dic,
                    pd,
                    rank,
                    status,
                ]);
            }
        }
        rows
    }

    /// `replicate,candidate,param,term,rmse,coverage`.
    pub fn effect_rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        for r in &self.replicates {
            for e in &r.effects {
                rows.push(vec![
                    (r.replicate + 1).to_string(),
                    self.candidates[e.candidate].clone(),
                    e.param.clone(),
                    e.term.clone(),
                    e.rmse.to_string(),
                    e.coverage.to_string(),
                ]);
            }
        }
        rows
    }

    /// Aggregate summary as `key: value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "task: simulate");
        let _ = writeln!(out, "truth: {}", self.truth);
        let _ = writeln!(out, "replicates: {}", self.replicates.len());
        let _ = writeln!(out, "failures: {}", self.failures());
        for (c, n) in self.candidates.iter().zip(self.selection_counts()) {
            let _ = writeln!(out, "lowest_dic.{c}: {n}");
        }
        let mut groups: BTreeMap<(usize, String, String), Vec<(f64, f64)>> = BTreeMap::new();
        for r in &self.replicates {
            for e in &r.effects {
                groups
                    .entry((e.candidate, e.param.clone(), e.term.clone()))
                    .or_default()
                    .push((e.rmse, e.coverage));
            }
        }
        for ((c, p, t), v) in groups {
            let m = v.len() as f64;
            let rmse = v.iter().map(|x| x.0).sum::<f64>() / m;
            let cov = v.iter().map(|x| x.1).sum::<f64>() / m;
            let _ = writeln!(out, "rmse.{}.{p}.{t}: {rmse:.6}", self.candidates[c]);
            let _ = writeln!(out, "coverage.{}.{p}.{t}: {cov:.4}", self.candidates[c]);
        }
        out
    }
}

fn fit_candidate(
    scenario: &SimulationScenario,
    c: usize,
    data: &Dataset,
    y: &[f64],
    sampler: &SamplerConfig,
    level: f64,
    grid: usize,
) -> distreg_core::Result<(DicResult, Vec<EffectRecovery>)> {
    let cand = &scenario.candidates[c];
    let model = assemble_predictors(&cand.model_spec(), data, None)?;
    let store = run_chain(&model, y, sampler)?;
    let d = dic(&PredictionDesign::training(&model), &store, y)?;
    let mut effects = Vec::new();
    if cand.family != scenario.family {
        return Ok((d, effects));
    }
    for (k, pred) in model.predictors.iter().enumerate() {
        for (j, blk) in pred.blocks.iter().enumerate() {
            let Basis::Spline { .. } = blk.basis() else { continue };
            let Some((column, _, _)) = blk.covariate_range() else { continue };
            if !scenario.has_truth(pred.param, column) {
                continue;
            }
            let eff = effect_samples(&model, &store, k, j, grid)?;
            let x = data.numeric(column)?;
            let centre = x.iter().map(|&v| scenario.truth_curve(pred.param, column, v)).sum::<f64>() / x.len() as f64;
            let truth: Vec<f64> = eff
                .samples
                .grid()
                .iter()
                .map(|&g| scenario.truth_curve(pred.param, column, g) - centre)
                .collect();
            let mean = eff.samples.mean();
            let mse = mean.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / truth.len() as f64;
            let summary = eff.samples.pointwise(level)?;
            let hits = summary
                .iter()
                .zip(&truth)
                .filter(|(s, t)| s.lower <= **t && **t <= s.upper)
                .count();
            effects.push(EffectRecovery {
                candidate: c,
                param: pred.param.to_string(),
                term: blk.label().to_string(),
                rmse: mse.sqrt(),
                coverage: hits as f64 / truth.len() as f64,
            });
        }
    }
    Ok((d, effects))
}

fn run_replicate(
    scenario: &SimulationScenario,
    r: usize,
    sampler: &SamplerConfig,
    level: f64,
    grid: usize,
) -> ReplicateReport {
    let mut report = ReplicateReport {
        replicate: r,
        fits: Vec::new(),
        effects: Vec::new(),
        error: None,
    };
    let (data, y) = match scenario.generate(sampler.seed, r) {
        Ok(d) => d,
        Err(e) => {
            report.error = Some(e.message);
            return report;
        }
    };
    for c in 0..scenario.candidates.len() {
        let config = SamplerConfig {
            seed: sampler.seed.wrapping_add(1_000 * r as u64 + c as u64 + 1),
            ..sampler.clone()
        };
        let result = fit_candidate(scenario, c, &data, &y, &config, level, grid);
        report.fits.push(CandidateFit {
            candidate: c,
            family: scenario.candidates[c].family,
            result: result.as_ref().map(|(d, _)| *d).map_err(|e| e.to_string()),
        });
        if let Ok((_, effects)) = result {
            report.effects.extend(effects);
        }
    }
    report
}

/// Runs every replicate on the current thread pool. Replicate `r` draws
/// its data from stream `r` of the sampler seed; failed fits are recorded
/// and the study continues.
pub fn run_simulation(
    scenario: &SimulationScenario,
    sampler: &SamplerConfig,
    level: f64,
    effect_grid: usize,
) -> Result<SimulationReport> {
    sampler.validate().map_err(|e| CliError::config(format!("sampler: {e}")))?;
    let replicates = (0..scenario.replicates)
        .into_par_iter()
        .map(|r| run_replicate(scenario, r, sampler, level, effect_grid))
        .collect();
    Ok(SimulationReport {
        candidates: scenario.candidates.iter().enumerate().map(|(i, c)| c.name(i)).collect(),
        truth: scenario.family,
        replicates,
    })
}
