use std::path::{Path, PathBuf};
use std::process::Command;

use distreg_cli::io::{read_draws, read_table};
use distreg_cli::{run, ErrorKind, RunConfig, Task};
use distreg_core::design::assemble_predictors;
use distreg_core::fitted::PredictionDesign;
use distreg_core::modelsel::dic;

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

const SHORT: &str = r#"
[sampler]
iterations = 1200
burn_in = 200
thin = 10
seed = 3
"#;

/// Config text over the bundled data, written into `dir`.
fn write_config(dir: &Path, body: &str) -> PathBuf {
    let data = bundled();
    let text = format!(
        "data = {:?}\nadjacency = {:?}\noutput = \"out\"\ncategorical = [\"region\"]\n{body}",
        data.join("synthetic.csv"),
        data.join("regions.txt")
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

const GAMMA_MODEL: &str = r#"
family = "gamma"

[predictors.mu]
terms = [
  { type = "pspline", column = "x", knots = 8 },
  { type = "linear", column = "east" },
  { type = "mrf", column = "region" },
]

[predictors.sigma]

[report]
effect_grid = 20
derived = ["mean", "gini", "q0.9"]
"#;

fn gamma_config(dir: &Path) -> PathBuf {
    write_config(dir, &format!("{GAMMA_MODEL}{SHORT}"))
}

#[test]
fn minimal_lognormal_config_parses() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        r#"
family = "lognormal"
[predictors.mu]
terms = [{ type = "linear", column = "x" }]
[predictors.sigma2]
"#,
    );
    let cfg = RunConfig::from_path(&path, &[]).unwrap();
    assert_eq!(cfg.task, Task::Fit);
    let spec = cfg.model_spec().unwrap();
    assert_eq!(spec.predictors["mu"].terms.len(), 1);
    assert!(spec.predictors["sigma2"].intercept);
}

fn config_error(body: &str) -> String {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), body);
    let err = RunConfig::from_path(&path, &[]).unwrap_err();
    assert_eq!(err.kind, ErrorKind::Config);
    err.message
}

#[test]
fn misspelt_term_type_names_the_key_and_line() {
    let msg = config_error(
        r#"family = "gamma"
[predictors.mu]
terms = [{ type = "psline", column = "x" }]
[predictors.sigma]
"#,
    );
    assert!(msg.contains("psline") && msg.contains("type"), "{msg}");
    assert!(msg.contains("line 7"), "{msg}");
}

#[test]
fn unknown_key_is_rejected_with_its_line() {
    let msg = config_error("family = \"gamma\"\niteratons = 5\n[predictors.mu]\n[predictors.sigma]\n");
    assert!(msg.contains("iteratons") && msg.contains("line 6"), "{msg}");
}

#[test]
fn unknown_column_names_the_term() {
    let msg = config_error(
        r#"family = "gamma"
[predictors.mu]
terms = [{ type = "pspline", column = "age" }]
[predictors.sigma]
"#,
    );
    assert!(msg.contains("predictors.mu.terms[0]") && msg.contains("'age'") && msg.contains("line 7"), "{msg}");
}

#[test]
fn family_and_predictors_must_agree() {
    let msg = config_error("family = \"dagum\"\n[predictors.a]\n[predictors.b]\n");
    assert!(msg.contains("predictors.c"), "{msg}");
    let msg = config_error("family = \"gamma\"\n[predictors.mu]\n[predictors.sigma]\n[predictors.nu]\n");
    assert!(msg.contains("predictors.nu") && msg.contains("line 8"), "{msg}");
    let msg = config_error("family = \"weibull\"\n");
    assert!(msg.contains("weibull"), "{msg}");
}

#[test]
fn semantic_errors_name_their_keys() {
    let msg = config_error(&format!("{GAMMA_MODEL}\n[sampler]\niterations = 100\nburn_in = 50\n"));
    assert!(msg.contains("'sampler'") && msg.contains("draws"), "{msg}");
    let msg = config_error(&GAMMA_MODEL.replace("level_placeholder", "").replace("effect_grid = 20", "level = 1.5"));
    assert!(msg.contains("report.level"), "{msg}");
    let msg = config_error(&GAMMA_MODEL.replace("\"q0.9\"", "\"q1.9\""));
    assert!(msg.contains("report.derived[2]"), "{msg}");
    let msg = config_error(
        r#"family = "gamma"
[predictors.mu]
terms = [{ type = "random", column = "x" }]
[predictors.sigma]
"#,
    );
    assert!(msg.contains("categorical"), "{msg}");
}

#[test]
fn full_config_round_trips_through_toml() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
task = "cv"
family = "dagum"
response = "y"

[predictors.a]
terms = [{ type = "linear", column = "east" }]

[predictors.b]
terms = [
  { type = "pspline", column = "x", knots = 10, degree = 3, order = 2, a = 0.001, b = 0.001 },
  { type = "varying", column = "x", by = "east", knots = 6 },
  { type = "linear", column = "east" },
  { type = "spatial", column = "region", covariates = ["east"] },
  { type = "random", column = "region", label = "iid" },
]

[predictors.c]
intercept = true

[sampler]
iterations = 3000
burn_in = 500
thin = 5
seed = 99
random_scan = true

[cv]
folds = 5
mixture = true

[report]
level = 0.9
derived = ["gini", "q0.5"]
"#;
    let path = write_config(dir.path(), body);
    let cfg = RunConfig::from_path(&path, &[]).unwrap();
    let text = cfg.to_toml().unwrap();
    let back = RunConfig::from_str_in(&text, dir.path(), &[]).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.to_toml().unwrap(), text);
}

#[test]
fn overrides_replace_and_add_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = gamma_config(dir.path());
    let cfg = RunConfig::from_path(
        &path,
        &["sampler.seed=17".into(), "task=score".into(), "report.level=0.8".into()],
    )
    .unwrap();
    assert_eq!(cfg.sampler.seed, 17);
    assert_eq!(cfg.task, Task::Score);
    assert_eq!(cfg.report.level, 0.8);
    let err = RunConfig::from_path(&path, &["sampler.thin=0".into()]).unwrap_err();
    assert!(err.message.contains("sampler.thin") && err.message.contains("--override"), "{}", err.message);
    let err = RunConfig::from_path(&path, &["sampler.nope=1".into()]).unwrap_err();
    assert!(err.message.contains("nope"), "{}", err.message);
}

fn numeric_file(path: &Path) {
    let table = read_table(path).unwrap();
    assert!(!table.rows.is_empty(), "{} is empty", path.display());
    let name = path.file_name().unwrap().to_str().unwrap();
    for (j, h) in table.header.iter().enumerate() {
        let label_column = (name.starts_with("effect_") && h == "level") || h == "fold";
        if label_column {
            continue;
        }
        for r in &table.rows {
            assert!(r[j].parse::<f64>().is_ok(), "{name}: column {h} value '{}'", r[j]);
        }
    }
}

#[test]
fn fit_writes_the_documented_files_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let path = gamma_config(dir.path());
    let cfg = RunConfig::from_path(&path, &[]).unwrap();
    let art = run(&cfg, 0).unwrap();
    let names: Vec<String> = art
        .files
        .iter()
        .map(|p| p.file_name().unwrap().to_str().unwrap().to_string())
        .collect();
    for expected in [
        "draws.csv",
        "dic.csv",
        "pit.csv",
        "qq.csv",
        "effect_mu_s_x.csv",
        "effect_mu_mrf_region.csv",
        "derived_mean.csv",
        "derived_gini.csv",
        "derived_q0.9.csv",
        "report.txt",
    ] {
        assert!(names.iter().any(|n| n == expected), "missing {expected} in {names:?}");
    }
    for p in art.files.iter().filter(|p| p.extension().is_some_and(|e| e == "csv")) {
        numeric_file(p);
    }
    let effect = read_table(&art.out_dir.join("effect_mu_s_x.csv")).unwrap();
    assert_eq!(effect.rows.len(), 20);
    let lo = effect.numeric("lower").unwrap();
    let hi = effect.numeric("upper").unwrap();
    let blo = effect.numeric("band_lower").unwrap();
    let bhi = effect.numeric("band_upper").unwrap();
    for g in 0..lo.len() {
        assert!(blo[g] <= lo[g] && hi[g] <= bhi[g]);
    }
    let regions = read_table(&art.out_dir.join("effect_mu_mrf_region.csv")).unwrap();
    assert_eq!(regions.rows.len(), 9);
    assert_eq!(read_table(&art.out_dir.join("derived_gini.csv")).unwrap().rows.len(), 500);

    let first = std::fs::read(art.out_dir.join("draws.csv")).unwrap();
    let again = run(&cfg, 0).unwrap();
    assert_eq!(std::fs::read(again.out_dir.join("draws.csv")).unwrap(), first);
    let other = RunConfig::from_path(&path, &["sampler.seed=4".into()]).unwrap();
    let third = run(&other, 0).unwrap();
    assert_ne!(std::fs::read(third.out_dir.join("draws.csv")).unwrap(), first);
}

#[test]
fn reported_dic_matches_recomputation_from_draws() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_path(gamma_config(dir.path()), &[]).unwrap();
    let art = run(&cfg, 0).unwrap();
    let (data, y) = distreg_cli::io::read_dataset(
        &bundled().join("synthetic.csv"),
        "y",
        &cfg.model_columns(),
        &cfg.categorical,
    )
    .unwrap();
    let adj = distreg_core::design::AdjacencyMap::from_path(bundled().join("regions.txt")).unwrap();
    let model = assemble_predictors(&cfg.model_spec().unwrap(), &data, Some(&adj)).unwrap();
    let store = read_draws(&art.out_dir.join("draws.csv"), &model).unwrap();
    let d = dic(&PredictionDesign::training(&model), &store, &y).unwrap();
    let table = read_table(&art.out_dir.join("dic.csv")).unwrap();
    let reported = table.numeric("dic").unwrap()[0];
    assert!((d.dic - reported).abs() <= 1e-9 * reported.abs(), "{} vs {reported}", d.dic);
    assert!((d.pd - table.numeric("pd").unwrap()[0]).abs() <= 1e-9 * d.pd.abs().max(1.0));
    let report = std::fs::read_to_string(art.out_dir.join("report.txt")).unwrap();
    assert!(report.contains(&format!("dic: {reported}")));
}

#[test]
fn score_task_writes_scores_and_alpha_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_path(gamma_config(dir.path()), &["task=score".into()]).unwrap();
    let art = run(&cfg, 0).unwrap();
    let scores = read_table(&art.out_dir.join("scores.csv")).unwrap();
    assert_eq!(scores.column("fold").unwrap(), vec!["training"]);
    let crps = scores.numeric("crps").unwrap()[0];
    let alpha = read_table(&art.out_dir.join("crps_alpha.csv")).unwrap();
    assert_eq!(alpha.rows.len(), distreg_core::modelsel::CRPS_NODES);
    let rule = distreg_core::quadrature::GaussLegendre::unit_interval(distreg_core::modelsel::CRPS_NODES);
    let curve: f64 = alpha.numeric("mean_score").unwrap().iter().zip(&rule.weights).map(|(s, w)| s * w).sum();
    assert!((curve - crps).abs() <= 1e-4 * crps.abs(), "{curve} vs {crps}");
    assert!(crps < 0.0 && scores.numeric("ls").unwrap()[0].is_finite());
}

#[test]
fn cv_task_scores_every_observation_once() {
    let dir = tempfile::tempdir().unwrap();
    let body = r#"
task = "cv"
family = "gamma"
[predictors.mu]
terms = [{ type = "linear", column = "x" }]
[predictors.sigma]
[cv]
folds = 3
[sampler]
iterations = 600
burn_in = 100
thin = 5
"#;
    let cfg = RunConfig::from_path(write_config(dir.path(), body), &[]).unwrap();
    let art = run(&cfg, 1).unwrap();
    let scores = read_table(&art.out_dir.join("scores.csv")).unwrap();
    assert_eq!(scores.rows.len(), 5);
    let n = scores.numeric("n").unwrap();
    let excluded = scores.numeric("excluded").unwrap();
    assert_eq!(n[..3].iter().sum::<f64>() + excluded[..3].iter().sum::<f64>(), 500.0);
    numeric_file(&art.out_dir.join("crps_alpha.csv"));
}

const SIMULATION: &str = r#"
task = "simulate"

[simulation]
family = "gamma"
n = 300
replicates = 3
covariates.x = { dist = "uniform" }
truth.mu = { intercept = 0.5, terms = [{ function = "sine", column = "x", scale = 0.5 }] }
truth.sigma = { intercept = 1.5 }
candidates = [{ family = "gamma", location = { terms = [{ type = "pspline", column = "x", knots = 8 }] } }]

[sampler]
iterations = 1500
burn_in = 500
thin = 5
"#;

#[test]
fn simulation_with_only_the_true_family_selects_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.toml");
    std::fs::write(&path, SIMULATION).unwrap();
    let cfg = RunConfig::from_path(&path, &[]).unwrap();
    let art = run(&cfg, 0).unwrap();
    let table = read_table(&art.out_dir.join("simulation.csv")).unwrap();
    assert_eq!(table.rows.len(), 3);
    assert!(table.column("rank").unwrap().iter().all(|r| *r == "1"));
    assert!(table.column("status").unwrap().iter().all(|s| *s == "ok"));
    let effects = read_table(&art.out_dir.join("simulation_effects.csv")).unwrap();
    assert_eq!(effects.rows.len(), 3);
    for (r, c) in effects.numeric("rmse").unwrap().iter().zip(effects.numeric("coverage").unwrap()) {
        assert!(*r < 0.3 && (0.0..=1.0).contains(&c), "rmse {r} coverage {c}");
    }
    let report = std::fs::read_to_string(art.out_dir.join("report.txt")).unwrap();
    assert!(report.contains("lowest_dic.gamma#1: 3"), "{report}");
}

fn distreg(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_distreg")).args(args).output().unwrap()
}

#[test]
fn binary_exit_codes_follow_the_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = gamma_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let out = dir.path().join("cli-out");

    let ok = distreg(&["--config", cfg, "--out", out.to_str().unwrap(), "--seed", "5", "--workers", "1"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(out.join("draws.csv").is_file() && out.join("report.txt").is_file());
    assert!(std::fs::read_to_string(out.join("report.txt")).unwrap().contains("seed: 5"));

    let bad = distreg(&["--config", cfg, "--override", "family=\"weibull\""]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("kind: config"));

    let text = std::fs::read_to_string(bundled().join("synthetic.csv")).unwrap();
    let broken = text.replacen("\n", "\nnot-a-number,0.5,0,r00\n", 1);
    std::fs::write(dir.path().join("broken.csv"), broken).unwrap();
    let data = distreg(&["--config", cfg, "--override", &format!("data={:?}", dir.path().join("broken.csv"))]);
    assert_eq!(data.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&data.stderr);
    assert!(stderr.contains("line 2") && stderr.contains("'y'"), "{stderr}");

    let negative = text.replacen("\n", "\n-1.0,0.5,0,r00\n", 1);
    std::fs::write(dir.path().join("negative.csv"), negative).unwrap();
    let numeric = distreg(&["--config", cfg, "--override", &format!("data={:?}", dir.path().join("negative.csv"))]);
    assert!(matches!(numeric.status.code(), Some(3 | 4)), "{:?}", numeric.status);

    let blocked = dir.path().join("file-not-dir");
    std::fs::write(&blocked, "").unwrap();
    let io = distreg(&["--config", cfg, "--out", blocked.join("sub").to_str().unwrap()]);
    assert_eq!(io.status.code(), Some(5));
}

#[test]
fn bundled_example_config_is_valid() {
    let cfg = RunConfig::from_path(bundled().join("synthetic.toml"), &[]).unwrap();
    assert_eq!(cfg.family, Some(distreg_core::Family::Gamma));
    assert_eq!(cfg.sampler.n_retained(), 1000);
}
