use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::scores::{score_set, PredictiveSet, ScoreSummary, CRPS_NODES};
use crate::design::{assemble_predictors, AdjacencyMap, Dataset, ModelSpec};
use crate::fitted::{rows_in_range, PredictionDesign};
use crate::quadrature::GaussLegendre;
use crate::sampler::{run_chain, SamplerConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CvOptions {
    pub folds: usize,
    pub sampler: SamplerConfig,
    /// Seed of the fold assignment; fold `f` runs its chain with seed
    /// `sampler.seed + f`.
    pub seed: u64,
    /// Worker threads for the folds; 0 uses the global pool.
    pub workers: usize,
    /// Score the posterior predictive mixture instead of the plug-in
    /// distribution at the posterior-mean coefficients.
    pub mixture: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            folds: 10,
            sampler: SamplerConfig::default(),
            seed: 1,
            workers: 0,
            mixture: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldScores {
    pub fold: usize,
    /// Hold-out rows dropped because a covariate lies outside the training
    /// range of the fold.
    pub excluded: usize,
    pub summary: ScoreSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub folds: Vec<FoldScores>,
    /// Mean of the per-fold averages.
    pub overall: ScoreSummary,
    /// Average over all scored observations.
    pub pooled: ScoreSummary,
    pub alpha: Vec<f64>,
    /// Mean per-α CRPS contribution over all scored observations.
    pub alpha_curve: Vec<f64>,
    pub alpha_weights: Vec<f64>,
}

impl ScoreReport {
    /// One row per fold plus `overall` and `pooled`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,n,excluded,undefined_qs,ls,qs,sps,crps\n");
        let mut row = |name: &str, excluded: usize, s: &ScoreSummary| {
            let _ = writeln!(
                out,
                "{name},{},{excluded},{},{},{},{},{}",
                s.n, s.undefined_quadratic, s.ls, s.qs, s.sps, s.crps
            );
        };
        for f in &self.folds {
            row(&(f.fold + 1).to_string(), f.excluded, &f.summary);
        }
        let excluded = self.folds.iter().map(|f| f.excluded).sum();
        row("overall", excluded, &self.overall);
        row("pooled", excluded, &self.pooled);
        out
    }

    /// Two columns: α and the mean CRPS contribution.
    pub fn alpha_csv(&self) -> String {
        let mut out = String::from("alpha,mean_score\n");
        for (a, c) in self.alpha.iter().zip(&self.alpha_curve) {
            let _ = writeln!(out, "{a},{c}");
        }
        out
    }
}

/// Random assignment of `n` observations to `folds` folds of sizes
/// differing by at most one.
pub fn assign_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 || n < folds {
        return Err(Error::invalid(format!("need 2 <= folds <= n, got folds = {folds}, n = {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    Ok(fold)
}

fn run_fold(
    f: usize,
    assignment: &[usize],
    spec: &ModelSpec,
    data: &Dataset,
    y: &[f64],
    adj: Option<&AdjacencyMap>,
    opts: &CvOptions,
    rule: &GaussLegendre,
) -> Result<FoldScores> {
    let train: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] != f).collect();
    let test: Vec<usize> = (0..y.len()).filter(|&i| assignment[i] == f).collect();
    let train_data = data.subset(&train)?;
    let train_y: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let model = assemble_predictors(spec, &train_data, adj)?;
    let config = SamplerConfig {
        seed: opts.sampler.seed.wrapping_add(f as u64),
        ..opts.sampler.clone()
    };
    let store = run_chain(&model, &train_y, &config)?;

    let test_data = data.subset(&test)?;
    let inside = rows_in_range(&model, &test_data)?;
    let keep: Vec<usize> = (0..test.len()).filter(|&r| inside[r]).collect();
    let excluded = test.len() - keep.len();
    let kept_data = test_data.subset(&keep)?;
    let kept_y: Vec<f64> = keep.iter().map(|&r| y[test[r]]).collect();
    let design = PredictionDesign::new(&model, &kept_data, false)?;
    let set = if opts.mixture {
        let draws = (0..store.n_draws())
            .map(|t| design.draw_params(&store, t))
            .collect::<Result<Vec<_>>>()?;
        PredictiveSet::mixture(model.family, kept_y, &draws)?
    } else {
        PredictiveSet::plug_in(model.family, kept_y, &design.posterior_mean_params(&store)?)?
    };
    let (_, summary) = score_set(&set, rule)?;
    Ok(FoldScores {
        fold: f,
        excluded,
        summary,
    })
}

/// k-fold cross-validation: each fold is predicted from a fresh chain fitted
/// to the remaining observations and scored with all four rules.
pub fn cross_validate(
    spec: &ModelSpec,
    data: &Dataset,
    y: &[f64],
    adj: Option<&AdjacencyMap>,
    opts: &CvOptions,
) -> Result<ScoreReport> {
    if y.len() != data.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} responses for {} rows",
            y.len(),
            data.n_rows()
        )));
    }
    let assignment = assign_folds(y.len(), opts.folds, opts.seed)?;
    let rule = GaussLegendre::unit_interval(CRPS_NODES);
    let work = || {
        (0..opts.folds)
            .into_par_iter()
            .map(|f| run_fold(f, &assignment, spec, data, y, adj, opts, &rule))
            .collect::<Result<Vec<_>>>()
    };
    let folds = if opts.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?
            .install(work)?
    } else {
        work()?
    };
    Ok(summarize(folds, &rule))
}

fn summarize(folds: Vec<FoldScores>, rule: &GaussLegendre) -> ScoreReport {
    let scored: Vec<&FoldScores> = folds.iter().filter(|f| f.summary.n > 0).collect();
    let k = scored.len() as f64;
    let fold_mean = |g: fn(&ScoreSummary) -> f64| scored.iter().map(|f| g(&f.summary)).sum::<f64>() / k;
    let n: usize = folds.iter().map(|f| f.summary.n).sum();
    let undefined: usize = folds.iter().map(|f| f.summary.undefined_quadratic).sum();
    let weighted = |g: fn(&ScoreSummary) -> f64, quad: bool| {
        let mut total = 0.0;
        let mut count = 0usize;
        for f in &scored {
            let m = if quad { f.summary.n - f.summary.undefined_quadratic } else { f.summary.n };
            if m > 0 {
                total += g(&f.summary) * m as f64;
                count += m;
            }
        }
        total / count as f64
    };
    let mut alpha_sums = vec![0.0; rule.len()];
    for f in &folds {
        for (s, v) in alpha_sums.iter_mut().zip(&f.summary.alpha_sums) {
            *s += v;
        }
    }
    let alpha_curve: Vec<f64> = alpha_sums.iter().map(|s| s / n as f64).collect();
    let overall = ScoreSummary {
        n,
        ls: fold_mean(|s| s.ls),
        qs: fold_mean(|s| s.qs),
        sps: fold_mean(|s| s.sps),
        crps: fold_mean(|s| s.crps),
        undefined_quadratic: undefined,
        alpha_sums: alpha_sums.clone(),
    };
    let pooled = ScoreSummary {
        n,
        ls: weighted(|s| s.ls, false),
        qs: weighted(|s| s.qs, true),
        sps: weighted(|s| s.sps, true),
        crps: weighted(|s| s.crps, false),
        undefined_quadratic: undefined,
        alpha_sums,
    };
    ScoreReport {
        folds,
        overall,
        pooled,
        alpha: rule.nodes.clone(),
        alpha_curve,
        alpha_weights: rule.weights.clone(),
    }
}
