use std::collections::BTreeSet;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn subset(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&i| v[i]).collect()),
            Column::Categorical(v) => Column::Categorical(rows.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

/// Named columns of equal length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Column>,
    n: usize,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn insert(&mut self, name: impl Into<String>, column: Column) -> Result<()> {
        let name = name.into();
        if self.names.is_empty() {
            self.n = column.len();
        } else if column.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "column '{name}' has {} rows, dataset has {}",
                column.len(),
                self.n
            )));
        }
        if let Some(i) = self.names.iter().position(|n| *n == name) {
            self.columns[i] = column;
        } else {
            self.names.push(name);
            self.columns.push(column);
        }
        Ok(())
    }

    pub fn with_numeric(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.insert(name, Column::Numeric(values))?;
        Ok(self)
    }

    pub fn with_categorical<S: Into<String>>(mut self, name: impl Into<String>, values: Vec<S>) -> Result<Self> {
        self.insert(name, Column::Categorical(values.into_iter().map(Into::into).collect()))?;
        Ok(self)
    }

    /// Numeric column with every entry checked for finiteness.
    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        match self.column(name)? {
            Column::Numeric(v) => {
                if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::NonFinite {
                        column: name.to_string(),
                        row,
                    });
                }
                Ok(v)
            }
            Column::Categorical(_) => Err(Error::invalid(format!("column '{name}' is categorical, expected numeric"))),
        }
    }

    /// Labels of a categorical column; numeric columns are rendered as text.
    pub fn labels(&self, name: &str) -> Result<Vec<String>> {
        match self.column(name)? {
            Column::Categorical(v) => Ok(v.clone()),
            Column::Numeric(v) => Ok(v.iter().map(|x| format_label(*x)).collect()),
        }
    }

    /// Sorted distinct labels of a column.
    pub fn levels(&self, name: &str) -> Result<Vec<String>> {
        let set: BTreeSet<String> = self.labels(name)?.into_iter().collect();
        Ok(set.into_iter().collect())
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n) {
            return Err(Error::invalid(format!("row {bad} out of range ({} rows)", self.n)));
        }
        Ok(Dataset {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.subset(rows)).collect(),
            n: rows.len(),
        })
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &Column)> {
        self.names.iter().map(String::as_str).zip(&self.columns)
    }
}

fn format_label(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}
