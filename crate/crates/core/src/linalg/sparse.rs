use ndarray::{Array1, Array2};

use crate::{Error, Result};

/// Symmetric matrix in compressed-row storage holding both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePrecision {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparsePrecision {
    /// Builds from `(row, col, value)` triplets. Each off-diagonal entry may be
    /// given once (either triangle) or twice with equal values; duplicates at
    /// the same position are summed.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * triplets.len());
        let mut seen = std::collections::HashMap::new();
        for &(r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({r}, {c}) outside {dim}x{dim}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Numerical(format!("non-finite entry at ({r}, {c})")));
            }
            *seen.entry((r, c)).or_insert(0.0) += v;
        }
        for (&(r, c), &v) in &seen {
            if r == c {
                entries.push((r, c, v));
                continue;
            }
            match seen.get(&(c, r)) {
                Some(&w) => {
                    if (v - w).abs() > 1e-12 * v.abs().max(w.abs()).max(1.0) {
                        return Err(Error::invalid(format!(
                            "matrix not symmetric at ({r}, {c}): {v} vs {w}"
                        )));
                    }
                    entries.push((r, c, v));
                }
                None => {
                    entries.push((r, c, v));
                    entries.push((c, r, v));
                }
            }
        }
        entries.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for &(r, c, v) in &entries {
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            dim,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Converts a dense symmetric matrix, dropping exact zeros.
    pub fn from_dense(a: &Array2<f64>) -> Result<Self> {
        let (n, m) = a.dim();
        if n != m {
            return Err(Error::DimensionMismatch(format!("{n}x{m} is not square")));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for j in 0..n {
                let v = a[[i, j]];
                if !v.is_finite() {
                    return Err(Error::Numerical(format!("non-finite entry at ({i}, {j})")));
                }
                if (v - a[[j, i]]).abs() > 1e-12 * v.abs().max(1.0) {
                    return Err(Error::invalid(format!("matrix not symmetric at ({i}, {j})")));
                }
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            dim: n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Array1<f64> {
        assert_eq!(x.len(), self.dim);
        Array1::from_iter((0..self.dim).map(|i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum::<f64>()
        }))
    }

    /// Quadratic form x'Ax.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.dim, self.dim));
        for i in 0..self.dim {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                a[[i, c]] = v;
            }
        }
        a
    }

    /// Returns `self + alpha * I`.
    pub fn add_ridge(&self, alpha: f64) -> Self {
        let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz() + self.dim);
        for i in 0..self.dim {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if c >= i {
                    trip.push((i, c, v));
                }
            }
            trip.push((i, i, alpha));
        }
        Self::from_triplets(self.dim, &trip).expect("valid by construction")
    }

    /// Neighbour lists of the adjacency graph (off-diagonal pattern).
    pub(crate) fn graph(&self) -> Vec<Vec<usize>> {
        (0..self.dim)
            .map(|i| self.row(i).0.iter().copied().filter(|&c| c != i).collect())
            .collect()
    }
}
