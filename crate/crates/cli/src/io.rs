//! CSV readers and writers. Every file written here can be read back by
//! [`read_table`], and draw files by [`read_draws`].

use std::path::{Path, PathBuf};

use distreg_core::design::{AssembledModel, Column, Dataset};
use distreg_core::sampler::PosteriorStore;
use ndarray::Array2;

use crate::error::{CliError, Result};

fn data_err(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::data(format!("{}: {msg}", path.display()))
}

/// Reads `response` and `columns` from a headed, comma-separated file.
/// Columns listed in `categorical` are kept as labels, all others must
/// parse as finite numbers.
pub fn read_dataset(path: &Path, response: &str, columns: &[String], categorical: &[String]) -> Result<(Dataset, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| data_err(path, e))?;
    let header: Vec<String> = reader.headers().map_err(|e| data_err(path, e))?.iter().map(String::from).collect();
    let index = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| data_err(path, format!("no column '{name}'")))
    };
    let yi = index(response)?;
    let wanted: Vec<(String, usize, bool)> = columns
        .iter()
        .map(|c| Ok((c.clone(), index(c)?, categorical.contains(c))))
        .collect::<Result<_>>()?;
    let mut y = Vec::new();
    let mut numeric: Vec<Vec<f64>> = vec![Vec::new(); wanted.len()];
    let mut labels: Vec<Vec<String>> = vec![Vec::new(); wanted.len()];
    for (r, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| data_err(path, e))?;
        // header is line 1
        let line = r + 2;
        let number = |i: usize, name: &str| -> Result<f64> {
            let raw = rec.get(i).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(data_err(path, format!("line {line}, column '{name}': '{raw}' is not a finite number"))),
            }
        };
        y.push(number(yi, response)?);
        for (k, (name, i, cat)) in wanted.iter().enumerate() {
            if *cat {
                labels[k].push(rec.get(*i).unwrap_or("").to_string());
            } else {
                numeric[k].push(number(*i, name)?);
            }
        }
    }
    let mut data = Dataset::new();
    for (k, (name, _, cat)) in wanted.into_iter().enumerate() {
        let column = if cat {
            Column::Categorical(std::mem::take(&mut labels[k]))
        } else {
            Column::Numeric(std::mem::take(&mut numeric[k]))
        };
        data.insert(name, column).map_err(|e| data_err(path, e))?;
    }
    Ok((data, y))
}

/// Collects rows and writes them as one CSV file.
pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<Vec<u8>>,
}

impl CsvOut {
    pub fn new(path: PathBuf, header: &[&str]) -> Result<Self> {
        let mut out = Self {
            path,
            writer: csv::Writer::from_writer(Vec::new()),
        };
        out.row(header.iter().copied())?;
        Ok(out)
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| CliError::io(format!("{}: {e}", self.path.display())))
    }

    pub fn finish(self) -> Result<PathBuf> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| CliError::io(format!("{}: {e}", self.path.display())))?;
        std::fs::write(&self.path, bytes).map_err(|e| CliError::io(format!("{}: {e}", self.path.display())))?;
        Ok(self.path)
    }
}

/// Shortest representation that parses back to the same value.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// A CSV file read back as strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    /// Values of a numeric column.
    pub fn numeric(&self, name: &str) -> Result<Vec<f64>> {
        self.column(name)
            .ok_or_else(|| CliError::data(format!("no column '{name}'")))?
            .into_iter()
            .map(|s| s.parse().map_err(|_| CliError::data(format!("column '{name}': '{s}' is not a number"))))
            .collect()
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| data_err(path, e))?;
    let header = reader.headers().map_err(|e| data_err(path, e))?.iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(String::from).collect()).map_err(|e| data_err(path, e)))
        .collect::<Result<_>>()?;
    Ok(Table { header, rows })
}

/// `draw`, one column per coefficient, one per smoothing variance, then
/// `deviance`.
pub fn write_draws(path: PathBuf, store: &PosteriorStore) -> Result<PathBuf> {
    let mut header = vec!["draw".to_string()];
    header.extend(store.coef_names());
    header.extend(store.variance_slots().iter().map(|v| v.name.clone()));
    header.push("deviance".into());
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = CsvOut::new(path, &refs)?;
    let (coefs, vars) = (store.coefs(), store.variances());
    for t in 0..store.n_draws() {
        let mut row = vec![(t + 1).to_string()];
        row.extend(coefs.row(t).iter().map(|&v| num(v)));
        row.extend(vars.row(t).iter().map(|&v| num(v)));
        row.push(num(store.deviance()[t]));
        out.row(&row)?;
    }
    out.finish()
}

/// Rebuilds a posterior store for `model` from a draws file.
pub fn read_draws(path: &Path, model: &AssembledModel) -> Result<PosteriorStore> {
    let table = read_table(path)?;
    let width = table.header.len();
    if width < 2 || table.header[0] != "draw" || table.header[width - 1] != "deviance" {
        return Err(data_err(path, "not a draws file"));
    }
    let parse = |s: &str| s.parse::<f64>().map_err(|_| data_err(path, format!("'{s}' is not a number")));
    let values: Vec<Vec<f64>> = table
        .rows
        .iter()
        .map(|r| r[1..].iter().map(|s| parse(s)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let n_vars = table.header.iter().filter(|h| h.contains(".tau2[")).count();
    let n_coef = width - 2 - n_vars;
    let n = values.len();
    let coefs = Array2::from_shape_fn((n, n_coef), |(t, j)| values[t][j]);
    let vars = Array2::from_shape_fn((n, n_vars), |(t, j)| values[t][n_coef + j]);
    let deviance = values.iter().map(|r| r[n_coef + n_vars]).collect();
    PosteriorStore::from_draws(model, coefs, vars, deviance).map_err(|e| data_err(path, e))
}

/// File-name friendly version of a term label.
pub fn file_stem(label: &str) -> String {
    let mut out = String::new();
    for ch in label.chars() {
        if ch.is_ascii_alphanumeric() || ch == '.' || ch == '-' {
            out.push(ch);
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}
