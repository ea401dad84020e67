//! Run configuration: a TOML document with one table per concern.
//!
//! ```toml
//! task = "fit"                 # fit | cv | simulate | score
//! data = "income.csv"          # relative to this file
//! response = "y"
//! categorical = ["region"]     # every other referenced column is numeric
//! adjacency = "regions.txt"    # required by mrf and spatial terms
//! output = "out"
//! family = "dagum"
//!
//! [predictors.a]
//! terms = []
//!
//! [predictors.b]
//! terms = [
//!   { type = "pspline", column = "age", knots = 20 },
//!   { type = "linear", column = "east" },
//!   { type = "mrf", column = "region" },
//! ]
//!
//! [predictors.c]
//!
//! [sampler]
//! iterations = 12000
//! burn_in = 2000
//! thin = 10
//!
//! [report]
//! level = 0.95
//! derived = ["mean", "gini", "q0.9"]
//! ```
//!
//! Term types are `linear`, `pspline`, `varying`, `random`, `mrf` and
//! `spatial`. The `[cv]`, `[score]` and `[simulation]` tables configure the
//! other tasks.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use distreg_core::derived::DerivedQuantity;
use distreg_core::design::{ModelSpec, PredictorSpec, TermDef};
use distreg_core::sampler::SamplerConfig;
use distreg_core::Family;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::simulate::SimulationScenario;

/// Fewest retained draws for which credible bands are reported.
pub const MIN_REPORT_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Fit,
    Cv,
    Simulate,
    Score,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Fit => "fit",
            Task::Cv => "cv",
            Task::Simulate => "simulate",
            Task::Score => "score",
        })
    }
}

fn default_task() -> Task {
    Task::Fit
}

fn default_response() -> String {
    "y".into()
}

fn default_output() -> PathBuf {
    PathBuf::from("output")
}

fn default_level() -> f64 {
    0.95
}

fn default_grid() -> usize {
    100
}

fn default_folds() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportOptions {
    /// Credible level of intervals and bands.
    #[serde(default = "default_level")]
    pub level: f64,
    /// Grid points per smooth effect curve.
    #[serde(default = "default_grid")]
    pub effect_grid: usize,
    /// Derived quantities tabulated per observation: `mean`, `sd`, `gini`
    /// or `q<p>`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub derived: Vec<String>,
    #[serde(default)]
    pub allow_extrapolation: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            level: default_level(),
            effect_grid: default_grid(),
            derived: Vec::new(),
            allow_extrapolation: false,
        }
    }
}

impl ReportOptions {
    pub fn quantities(&self) -> Result<Vec<DerivedQuantity>> {
        self.derived
            .iter()
            .map(|s| s.parse().map_err(|e| CliError::config(format!("report.derived: {e}"))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSection {
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Score the posterior predictive mixture instead of the plug-in.
    #[serde(default)]
    pub mixture: bool,
}

impl Default for CvSection {
    fn default() -> Self {
        Self {
            folds: default_folds(),
            mixture: false,
        }
    }
}

/// Hold-out scoring for the `score` task; without `data` the training
/// observations are scored.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub mixture: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_task")]
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default = "default_response")]
    pub response: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categorical: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub predictors: BTreeMap<String, PredictorSpec>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub report: ReportOptions,
    #[serde(default)]
    pub cv: CvSection,
    #[serde(default)]
    pub score: ScoreSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationScenario>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Original text plus applied overrides, for pointing errors at a line.
#[derive(Debug, Clone, Default)]
pub struct Source {
    pub text: String,
    pub overrides: Vec<String>,
}

fn split_key(key: &str) -> Vec<String> {
    key.split('.')
        .map(|s| s.trim().trim_matches('"').trim_matches('\'').to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn strip_index(seg: &str) -> &str {
    seg.split('[').next().unwrap_or(seg)
}

impl Source {
    /// One-based line of the assignment or table header that best matches
    /// the dotted `key`.
    pub fn line_of(&self, key: &str) -> Option<usize> {
        let target: Vec<&str> = key.split('.').map(strip_index).collect();
        let mut header: Vec<String> = Vec::new();
        let mut best: Option<(usize, usize)> = None;
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            let full = if line.starts_with('[') {
                header = split_key(line.trim_start_matches('[').split(']').next().unwrap_or(""));
                header.clone()
            } else if let Some((k, _)) = line.split_once('=') {
                if line.starts_with('#') {
                    continue;
                }
                let mut full = header.clone();
                full.extend(split_key(k));
                full
            } else {
                continue;
            };
            let matched = full.iter().zip(&target).take_while(|(a, b)| a == *b).count();
            if matched == target.len() && full.len() == target.len() {
                return Some(i + 1);
            }
            if matched > 0 && matched == full.len() && best.is_none_or(|(m, _)| matched > m) {
                best = Some((matched, i + 1));
            }
        }
        best.map(|(_, line)| line)
    }

    fn locate(&self, key: &str) -> String {
        let root = strip_index(key.split('.').next().unwrap_or(key));
        let overridden = self.overrides.iter().any(|o| {
            let k = o.split('=').next().unwrap_or("").trim();
            k == key || key.starts_with(&format!("{k}.")) || k.starts_with(&format!("{key}.")) || k == root
        });
        if overridden {
            return "--override".into();
        }
        match self.line_of(key) {
            Some(l) => format!("line {l}"),
            None => "not set".into(),
        }
    }

    /// Config error naming `key` and where it was set.
    pub fn error(&self, key: &str, message: impl fmt::Display) -> CliError {
        CliError::config(format!("key '{key}' ({}): {message}", self.locate(key)))
    }
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Sets `key=value` in `table`, creating intermediate tables. Values are
/// read as TOML and fall back to bare strings.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override '{assignment}' is not of the form key=value")))?;
    let path = split_key(key);
    let Some((last, parents)) = path.split_last() else {
        return Err(CliError::config(format!("override '{assignment}' has an empty key")));
    };
    let mut cur = table;
    for seg in parents {
        let entry = cur
            .entry(seg.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("override key '{key}': '{seg}' is not a table")))?;
    }
    cur.insert(last.clone(), parse_value(raw.trim()));
    Ok(())
}

fn read_header(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let header = reader
        .headers()
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    Ok(header.iter().map(|h| h.trim().to_string()).collect())
}

impl RunConfig {
    /// Parses and validates a config file; `overrides` are `key=value`
    /// assignments applied on top of the file.
    pub fn from_path(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str_in(&text, base, overrides)
    }

    /// Parses config text whose relative paths resolve against `base_dir`.
    pub fn from_str_in(text: &str, base_dir: impl Into<PathBuf>, overrides: &[String]) -> Result<Self> {
        let source = Source {
            text: text.to_string(),
            overrides: overrides.to_vec(),
        };
        let mut cfg: RunConfig = if overrides.is_empty() {
            toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?
        } else {
            let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
            for o in overrides {
                apply_override(&mut table, o)?;
            }
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| {
                let msg = e.to_string();
                let key = msg.split('`').nth(1).unwrap_or("");
                match source.line_of(key) {
                    Some(l) if !key.is_empty() => CliError::config(format!("line {l}: {msg}")),
                    _ => CliError::config(msg),
                }
            })?
        };
        cfg.base_dir = base_dir.into();
        cfg.validate(&source)?;
        Ok(cfg)
    }

    /// Serialises back to TOML; parsing the result gives an equal config.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::config(format!("cannot serialise config: {e}")))
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        self.base_dir.join(path)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output)
    }

    /// Model of the `fit`, `cv` and `score` tasks.
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let family = self
            .family
            .ok_or_else(|| CliError::config("key 'family' (not set): required for this task"))?;
        Ok(ModelSpec {
            family,
            predictors: self.predictors.clone(),
        })
    }

    /// Columns the model reads besides the response.
    pub fn model_columns(&self) -> Vec<String> {
        ModelSpec {
            family: self.family.unwrap_or(Family::Gamma),
            predictors: self.predictors.clone(),
        }
        .columns()
    }

    fn validate(&self, src: &Source) -> Result<()> {
        if !(self.report.level > 0.0 && self.report.level < 1.0) {
            return Err(src.error("report.level", format!("{} is not inside (0, 1)", self.report.level)));
        }
        if self.report.effect_grid < 2 {
            return Err(src.error("report.effect_grid", "needs at least 2 points"));
        }
        for (i, q) in self.report.derived.iter().enumerate() {
            if let Err(e) = q.parse::<DerivedQuantity>() {
                return Err(src.error(&format!("report.derived[{i}]"), e));
            }
        }
        self.sampler.validate().map_err(|e| {
            let msg = e.to_string();
            let field = ["burn_in", "iterations", "thin", "tau2_start", "audit_every"]
                .into_iter()
                .find(|f| msg.contains(f))
                .map_or("sampler".to_string(), |f| format!("sampler.{f}"));
            src.error(&field, msg)
        })?;
        match self.task {
            Task::Simulate => {
                let sim = self
                    .simulation
                    .as_ref()
                    .ok_or_else(|| src.error("simulation", "the simulate task needs a [simulation] table"))?;
                sim.validate(src)
            }
            task => {
                self.validate_model(src)?;
                if task == Task::Cv && self.cv.folds < 2 {
                    return Err(src.error("cv.folds", "needs at least 2 folds"));
                }
                if task != Task::Cv && self.sampler.n_retained() < MIN_REPORT_DRAWS {
                    return Err(src.error(
                        "sampler",
                        format!(
                            "retains {} draws; credible bands need at least {MIN_REPORT_DRAWS}",
                            self.sampler.n_retained()
                        ),
                    ));
                }
                Ok(())
            }
        }
    }

    fn validate_model(&self, src: &Source) -> Result<()> {
        let family = self.family.ok_or_else(|| src.error("family", "required for this task"))?;
        let names = family.param_names();
        for key in self.predictors.keys() {
            if !names.contains(&key.as_str()) {
                return Err(src.error(
                    &format!("predictors.{key}"),
                    format!("not a parameter of the {family} family (expected {})", names.join(", ")),
                ));
            }
        }
        for name in names {
            if !self.predictors.contains_key(*name) {
                return Err(src.error(
                    &format!("predictors.{name}"),
                    format!("the {family} family needs a predictor for each of {}", names.join(", ")),
                ));
            }
        }
        let data = self.data.as_ref().ok_or_else(|| src.error("data", "required for this task"))?;
        let data_path = self.resolve(data);
        if !data_path.is_file() {
            return Err(src.error("data", format!("file {} does not exist", data_path.display())));
        }
        let header = read_header(&data_path)?;
        if !header.contains(&self.response) {
            return Err(src.error("response", format!("column '{}' not in {}", self.response, data_path.display())));
        }
        for (i, c) in self.categorical.iter().enumerate() {
            if !header.contains(c) {
                return Err(src.error(&format!("categorical[{i}]"), format!("unknown column '{c}'")));
            }
        }
        let mut needs_map = false;
        for (param, pred) in &self.predictors {
            for (i, term) in pred.terms.iter().enumerate() {
                let key = format!("predictors.{param}.terms[{i}]");
                for c in term.columns() {
                    if !header.iter().any(|h| h == c) {
                        return Err(src.error(&key, format!("unknown column '{c}'")));
                    }
                }
                let categorical = |c: &str| self.categorical.iter().any(|k| k == c);
                match term {
                    TermDef::Random { column, .. } | TermDef::Mrf { column, .. } | TermDef::Spatial { column, .. }
                        if !categorical(column) =>
                    {
                        return Err(src.error(&key, format!("column '{column}' must be listed in 'categorical'")));
                    }
                    TermDef::Linear { column } | TermDef::Pspline { column, .. } if categorical(column) => {
                        return Err(src.error(&key, format!("column '{column}' is categorical; expected numeric")));
                    }
                    _ => {}
                }
                needs_map |= matches!(term, TermDef::Mrf { .. } | TermDef::Spatial { structured: true, .. });
            }
        }
        if needs_map && self.adjacency.is_none() {
            return Err(src.error("adjacency", "mrf and spatial terms need an adjacency file"));
        }
        if let Some(adj) = &self.adjacency {
            let p = self.resolve(adj);
            if !p.is_file() {
                return Err(src.error("adjacency", format!("file {} does not exist", p.display())));
            }
        }
        if self.task == Task::Score {
            if let Some(d) = &self.score.data {
                let p = self.resolve(d);
                if !p.is_file() {
                    return Err(src.error("score.data", format!("file {} does not exist", p.display())));
                }
                let h = read_header(&p)?;
                for c in self.model_columns().iter().chain(std::iter::once(&self.response)) {
                    if !h.contains(c) {
                        return Err(src.error("score.data", format!("column '{c}' missing from {}", p.display())));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "family = \"gamma\"\n\n[predictors.mu]\nterms = []\n\n[sampler]\n# thin = 2\nthin = 5\nseed=3\n";

    fn source() -> Source {
        Source {
            text: TEXT.into(),
            overrides: Vec::new(),
        }
    }

    #[test]
    fn line_of_finds_assignments_inside_tables() {
        let s = source();
        assert_eq!(s.line_of("family"), Some(1));
        assert_eq!(s.line_of("predictors.mu"), Some(3));
        assert_eq!(s.line_of("predictors.mu.terms[0]"), Some(4));
        assert_eq!(s.line_of("sampler.thin"), Some(8));
        assert_eq!(s.line_of("sampler.seed"), Some(9));
        assert_eq!(s.line_of("sampler.burn_in"), Some(6));
        assert_eq!(s.line_of("report.level"), None);
    }

    #[test]
    fn errors_point_at_overrides() {
        let mut s = source();
        s.overrides.push("sampler.thin=0".into());
        assert!(s.error("sampler.thin", "bad").message.contains("--override"));
        assert!(s.error("family", "bad").message.contains("line 1"));
    }

    #[test]
    fn overrides_parse_toml_values_and_fall_back_to_strings() {
        let mut t: toml::Table = toml::from_str(TEXT).unwrap();
        apply_override(&mut t, "sampler.thin=7").unwrap();
        apply_override(&mut t, "report.level = 0.5").unwrap();
        apply_override(&mut t, "task=cv").unwrap();
        apply_override(&mut t, "categorical=[\"a\", \"b\"]").unwrap();
        assert_eq!(t["sampler"]["thin"].as_integer(), Some(7));
        assert_eq!(t["report"]["level"].as_float(), Some(0.5));
        assert_eq!(t["task"].as_str(), Some("cv"));
        assert_eq!(t["categorical"].as_array().map(Vec::len), Some(2));
        assert!(apply_override(&mut t, "family.x=1").is_err());
        assert!(apply_override(&mut t, "novalue").is_err());
        assert!(apply_override(&mut t, "=3").is_err());
    }

    #[test]
    fn task_names_match_their_serialised_form() {
        for task in [Task::Fit, Task::Cv, Task::Simulate, Task::Score] {
            let t: toml::Table = toml::from_str(&format!("task = \"{task}\"")).unwrap();
            let back: Task = t["task"].clone().try_into().unwrap();
            assert_eq!(back, task);
        }
    }
}
