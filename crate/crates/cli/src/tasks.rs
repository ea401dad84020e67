use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use distreg_core::derived::{derived_samples, effect_samples, simultaneous_band, summarize_scalar};
use distreg_core::design::{assemble_predictors, AdjacencyMap, AssembledModel, Dataset};
use distreg_core::fitted::PredictionDesign;
use distreg_core::modelsel::{
    cross_validate, dic, ks_critical, ks_uniform, qq_pairs, quantile_residuals, score_set, CvOptions, DicResult,
    PredictiveSet, ScoreSummary, CRPS_NODES,
};
use distreg_core::quadrature::GaussLegendre;
use distreg_core::sampler::{run_chain, PosteriorStore, RunReport};

use crate::config::{RunConfig, Task};
use crate::error::{Classify, CliError, ErrorKind, Result};
use crate::io::{file_stem, num, read_dataset, write_draws, CsvOut};
use crate::simulate::run_simulation;

/// Files written by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl Artifacts {
    fn new(out_dir: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(format!("{}: {e}", out_dir.display())))?;
        Ok(Self {
            out_dir,
            files: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, body).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
        self.files.push(p);
        Ok(())
    }

    fn names(&self) -> String {
        self.files
            .iter()
            .filter_map(|p| p.file_name().and_then(|n| n.to_str()))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Runs the configured task; `workers > 0` bounds the thread pool.
pub fn run(cfg: &RunConfig, workers: usize) -> Result<Artifacts> {
    let go = || match cfg.task {
        Task::Fit => run_fit(cfg),
        Task::Cv => run_cv(cfg),
        Task::Score => run_score(cfg),
        Task::Simulate => run_simulate(cfg),
    };
    if workers == 0 {
        return go();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::config(format!("--workers {workers}: {e}")))?
        .install(go)
}

struct Loaded {
    data: Dataset,
    y: Vec<f64>,
    adjacency: Option<AdjacencyMap>,
}

fn load(cfg: &RunConfig, path: &Path) -> Result<Loaded> {
    let (data, y) = read_dataset(path, &cfg.response, &cfg.model_columns(), &cfg.categorical)?;
    let adjacency = cfg
        .adjacency
        .as_ref()
        .map(|p| {
            let p = cfg.resolve(p);
            AdjacencyMap::from_path(&p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))
        })
        .transpose()?;
    Ok(Loaded { data, y, adjacency })
}

fn training(cfg: &RunConfig) -> Result<Loaded> {
    let path = cfg
        .data
        .as_ref()
        .map(|d| cfg.resolve(d))
        .ok_or_else(|| CliError::config("key 'data' (not set): required for this task"))?;
    load(cfg, &path)
}

struct Fitted {
    model: AssembledModel,
    store: PosteriorStore,
    y: Vec<f64>,
}

fn fit(cfg: &RunConfig, loaded: Loaded) -> Result<Fitted> {
    let spec = cfg.model_spec()?;
    let model = assemble_predictors(&spec, &loaded.data, loaded.adjacency.as_ref()).or_kind(ErrorKind::Data)?;
    let store = run_chain(&model, &loaded.y, &cfg.sampler).or_kind(ErrorKind::Numeric)?;
    Ok(Fitted {
        model,
        store,
        y: loaded.y,
    })
}

fn write_dic(art: &mut Artifacts, d: &DicResult) -> Result<()> {
    let mut out = CsvOut::new(art.path("dic.csv"), &["dic", "pd", "mean_deviance", "deviance_at_mean", "n_draws"])?;
    out.row([num(d.dic), num(d.pd), num(d.mean_deviance), num(d.deviance_at_mean), d.n_draws.to_string()])?;
    art.files.push(out.finish()?);
    Ok(())
}

/// Writes `pit.csv` and `qq.csv`; returns (KS statistic, clamped count).
fn write_residuals(art: &mut Artifacts, set: &PredictiveSet) -> Result<(f64, usize)> {
    let res = quantile_residuals(set).or_kind(ErrorKind::Numeric)?;
    let mut out = CsvOut::new(art.path("pit.csv"), &["row", "y", "pit", "residual"])?;
    for (i, ((_, y), (u, r))) in set.iter().zip(res.pit.iter().zip(&res.residuals)).enumerate() {
        out.row([(i + 1).to_string(), num(y), num(*u), num(*r)])?;
    }
    art.files.push(out.finish()?);
    let mut out = CsvOut::new(art.path("qq.csv"), &["theoretical", "sample"])?;
    for (t, s) in qq_pairs(&res.residuals) {
        out.row([num(t), num(s)])?;
    }
    art.files.push(out.finish()?);
    Ok((ks_uniform(&res.pit), res.clamped))
}

fn write_effects(art: &mut Artifacts, cfg: &RunConfig, f: &Fitted) -> Result<()> {
    let level = cfg.report.level;
    for (k, pred) in f.model.predictors.iter().enumerate() {
        for (j, blk) in pred.blocks.iter().enumerate() {
            if !blk.is_penalized() {
                continue;
            }
            let eff = effect_samples(&f.model, &f.store, k, j, cfg.report.effect_grid).or_kind(ErrorKind::Numeric)?;
            let point = eff.samples.pointwise(level).or_kind(ErrorKind::Numeric)?;
            let band = simultaneous_band(&eff.samples, level).or_kind(ErrorKind::Numeric)?;
            let first = if eff.levels.is_some() { "level" } else { &eff.covariate };
            let name = format!("effect_{}.csv", file_stem(&format!("{}_{}", pred.param, blk.label())));
            let mut out = CsvOut::new(
                art.path(&name),
                &[first, "mean", "median", "lower", "upper", "band_lower", "band_upper"],
            )?;
            for (g, s) in point.iter().enumerate() {
                let x = match &eff.levels {
                    Some(l) => l[g].clone(),
                    None => num(eff.samples.grid()[g]),
                };
                out.row([
                    x,
                    num(s.mean),
                    num(s.median),
                    num(s.lower),
                    num(s.upper),
                    num(band.lower[g]),
                    num(band.upper[g]),
                ])?;
            }
            art.files.push(out.finish()?);
        }
    }
    Ok(())
}

fn write_derived(art: &mut Artifacts, cfg: &RunConfig, f: &Fitted) -> Result<()> {
    let design = PredictionDesign::training(&f.model);
    for q in cfg.report.quantities()? {
        let draws = derived_samples(&design, &f.store, q).or_kind(ErrorKind::Numeric)?;
        let mut out = CsvOut::new(art.path(&format!("derived_{q}.csv")), &["row", "mean", "median", "lower", "upper"])?;
        for (i, col) in draws.columns().into_iter().enumerate() {
            let s = summarize_scalar(col.to_vec(), cfg.report.level).or_kind(ErrorKind::Numeric)?;
            out.row([(i + 1).to_string(), num(s.mean), num(s.median), num(s.lower), num(s.upper)])?;
        }
        art.files.push(out.finish()?);
    }
    Ok(())
}

fn run_text(report: Option<&RunReport>) -> String {
    report.map(RunReport::to_text).unwrap_or_default()
}

/// Fits the model and writes draws, DIC, residuals, effect curves with
/// pointwise and simultaneous bands, and derived quantities.
pub fn run_fit(cfg: &RunConfig) -> Result<Artifacts> {
    let mut art = Artifacts::new(cfg.output_dir())?;
    let f = fit(cfg, training(cfg)?)?;
    art.files.push(write_draws(art.path("draws.csv"), &f.store)?);
    let design = PredictionDesign::training(&f.model);
    let d = dic(&design, &f.store, &f.y).or_kind(ErrorKind::Numeric)?;
    write_dic(&mut art, &d)?;
    let params = design.posterior_mean_params(&f.store).or_kind(ErrorKind::Numeric)?;
    let set = PredictiveSet::plug_in(f.model.family, f.y.clone(), &params).or_kind(ErrorKind::Numeric)?;
    let (ks, clamped) = write_residuals(&mut art, &set)?;
    write_effects(&mut art, cfg, &f)?;
    write_derived(&mut art, cfg, &f)?;
    let mut text = format!("task: fit\n{}", run_text(f.store.report()));
    let _ = writeln!(text, "dic: {}", d.dic);
    let _ = writeln!(text, "pd: {}", d.pd);
    let _ = writeln!(text, "mean_deviance: {}", d.mean_deviance);
    let _ = writeln!(text, "deviance_at_mean: {}", d.deviance_at_mean);
    let _ = writeln!(text, "pit_ks: {ks:.6}");
    let _ = writeln!(text, "pit_ks_critical_1pct: {:.6}", ks_critical(f.y.len(), 0.01));
    let _ = writeln!(text, "pit_clamped: {clamped}");
    let _ = writeln!(text, "files: {},report.txt", art.names());
    art.text("report.txt", &text)?;
    Ok(art)
}

fn summary_row(name: &str, excluded: usize, s: &ScoreSummary) -> Vec<String> {
    vec![
        name.to_string(),
        s.n.to_string(),
        excluded.to_string(),
        s.undefined_quadratic.to_string(),
        num(s.ls),
        num(s.qs),
        num(s.sps),
        num(s.crps),
    ]
}

const SCORE_HEADER: [&str; 8] = ["fold", "n", "excluded", "undefined_qs", "ls", "qs", "sps", "crps"];

/// Fits on the training data and scores the hold-out file (or the training
/// data when none is given) with LS, QS, SPS and CRPS.
pub fn run_score(cfg: &RunConfig) -> Result<Artifacts> {
    let mut art = Artifacts::new(cfg.output_dir())?;
    let f = fit(cfg, training(cfg)?)?;
    art.files.push(write_draws(art.path("draws.csv"), &f.store)?);
    let (label, design, y) = match &cfg.score.data {
        Some(p) => {
            let held = load(cfg, &cfg.resolve(p))?;
            let design =
                PredictionDesign::new(&f.model, &held.data, cfg.report.allow_extrapolation).or_kind(ErrorKind::Data)?;
            ("holdout", design, held.y)
        }
        None => ("training", PredictionDesign::training(&f.model), f.y.clone()),
    };
    let set = if cfg.score.mixture {
        let draws = (0..f.store.n_draws())
            .map(|t| design.draw_params(&f.store, t))
            .collect::<distreg_core::Result<Vec<_>>>()
            .or_kind(ErrorKind::Numeric)?;
        PredictiveSet::mixture(f.model.family, y, &draws)
    } else {
        design
            .posterior_mean_params(&f.store)
            .and_then(|p| PredictiveSet::plug_in(f.model.family, y, &p))
    }
    .or_kind(ErrorKind::Numeric)?;
    let rule = GaussLegendre::unit_interval(CRPS_NODES);
    let (_, summary) = score_set(&set, &rule).or_kind(ErrorKind::Numeric)?;
    let mut out = CsvOut::new(art.path("scores.csv"), &SCORE_HEADER)?;
    out.row(summary_row(label, 0, &summary))?;
    art.files.push(out.finish()?);
    let mut out = CsvOut::new(art.path("crps_alpha.csv"), &["alpha", "mean_score"])?;
    for (a, s) in rule.nodes.iter().zip(&summary.alpha_sums) {
        out.row([num(*a), num(s / summary.n as f64)])?;
    }
    art.files.push(out.finish()?);
    let (ks, clamped) = write_residuals(&mut art, &set)?;
    let mut text = format!("task: score\nscored: {label}\n{}", run_text(f.store.report()));
    let _ = writeln!(text, "n_scored: {}", summary.n);
    let _ = writeln!(text, "ls: {}", summary.ls);
    let _ = writeln!(text, "qs: {}", summary.qs);
    let _ = writeln!(text, "sps: {}", summary.sps);
    let _ = writeln!(text, "crps: {}", summary.crps);
    let _ = writeln!(text, "undefined_qs: {}", summary.undefined_quadratic);
    let _ = writeln!(text, "pit_ks: {ks:.6}");
    let _ = writeln!(text, "pit_clamped: {clamped}");
    let _ = writeln!(text, "files: {},report.txt", art.names());
    art.text("report.txt", &text)?;
    Ok(art)
}

/// k-fold cross-validated scores.
pub fn run_cv(cfg: &RunConfig) -> Result<Artifacts> {
    let mut art = Artifacts::new(cfg.output_dir())?;
    let loaded = training(cfg)?;
    let opts = CvOptions {
        folds: cfg.cv.folds,
        sampler: cfg.sampler.clone(),
        seed: cfg.sampler.seed,
        workers: 0,
        mixture: cfg.cv.mixture,
    };
    let report = cross_validate(
        &cfg.model_spec()?,
        &loaded.data,
        &loaded.y,
        loaded.adjacency.as_ref(),
        &opts,
    )
    .or_kind(ErrorKind::Numeric)?;
    art.text("scores.csv", &report.to_csv())?;
    art.text("crps_alpha.csv", &report.alpha_csv())?;
    let mut text = String::from("task: cv\n");
    let _ = writeln!(text, "folds: {}", cfg.cv.folds);
    let _ = writeln!(text, "mixture: {}", cfg.cv.mixture);
    for (name, s) in [("overall", &report.overall), ("pooled", &report.pooled)] {
        let _ = writeln!(text, "{name}.n: {}", s.n);
        let _ = writeln!(text, "{name}.ls: {}", s.ls);
        let _ = writeln!(text, "{name}.qs: {}", s.qs);
        let _ = writeln!(text, "{name}.sps: {}", s.sps);
        let _ = writeln!(text, "{name}.crps: {}", s.crps);
    }
    let excluded: usize = report.folds.iter().map(|f| f.excluded).sum();
    let _ = writeln!(text, "excluded: {excluded}");
    let _ = writeln!(text, "files: {},report.txt", art.names());
    art.text("report.txt", &text)?;
    Ok(art)
}

/// Simulation study over the configured scenario.
pub fn run_simulate(cfg: &RunConfig) -> Result<Artifacts> {
    let scenario = cfg
        .simulation
        .as_ref()
        .ok_or_else(|| CliError::config("key 'simulation' (not set): required for the simulate task"))?;
    let mut art = Artifacts::new(cfg.output_dir())?;
    let report = run_simulation(scenario, &cfg.sampler, cfg.report.level, cfg.report.effect_grid)?;
    let mut out = CsvOut::new(
        art.path("simulation.csv"),
        &["replicate", "candidate", "family", "dic", "pd", "rank", "status"],
    )?;
    for row in report.dic_rows() {
        out.row(row)?;
    }
    art.files.push(out.finish()?);
    let mut out = CsvOut::new(
        art.path("simulation_effects.csv"),
        &["replicate", "candidate", "param", "term", "rmse", "coverage"],
    )?;
    for row in report.effect_rows() {
        out.row(row)?;
    }
    art.files.push(out.finish()?);
    let mut text = report.to_text();
    let _ = writeln!(text, "files: {},report.txt", art.names());
    art.text("report.txt", &text)?;
    Ok(art)
}
