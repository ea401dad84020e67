use std::collections::VecDeque;
use std::sync::Arc;

use ndarray::Array2;

use super::SparsePrecision;
use crate::{Error, Result};

/// Relative pivot threshold: a squared pivot below `PIVOT_TOL * max diag`
/// is treated as a loss of positive definiteness.
pub const PIVOT_TOL: f64 = 1e-12;

/// Relative ridge added on a failed factorization before giving up.
pub const JITTER: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    Natural,
    #[default]
    ReverseCuthillMcKee,
}

/// Ordering and envelope of a factor; depends only on the sparsity pattern.
#[derive(Debug, Clone)]
pub struct Symbolic {
    dim: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// `inv[old] = new`
    inv: Vec<usize>,
    /// First column index in row `i` of the permuted factor.
    first: Vec<usize>,
    /// Offset of row `i` in the packed value array.
    start: Vec<usize>,
}

impl Symbolic {
    pub fn analyze(pattern: &SparsePrecision, ordering: Ordering) -> Self {
        let n = pattern.dim();
        let perm = match ordering {
            Ordering::Natural => (0..n).collect(),
            Ordering::ReverseCuthillMcKee => reverse_cuthill_mckee(&pattern.graph()),
        };
        Self::with_permutation(pattern, perm)
    }

    /// Uses a caller-supplied permutation (`perm[new] = old`).
    pub fn with_permutation(pattern: &SparsePrecision, perm: Vec<usize>) -> Self {
        let n = pattern.dim();
        assert_eq!(perm.len(), n);
        let mut inv = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            assert!(inv[old] == usize::MAX, "not a permutation");
            inv[old] = new;
        }
        let mut first = vec![0usize; n];
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            let (cols, _) = pattern.row(perm[i]);
            first[i] = cols.iter().map(|&c| inv[c]).filter(|&j| j <= i).min().unwrap_or(i);
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        Self {
            dim: n,
            perm,
            inv,
            first,
            start,
        }
    }

    /// Dense analysis: full lower triangle, natural order.
    pub fn dense(dim: usize) -> Self {
        let first = vec![0; dim];
        let start = (0..=dim).map(|i| i * (i + 1) / 2).collect();
        Self {
            dim,
            perm: (0..dim).collect(),
            inv: (0..dim).collect(),
            first,
            start,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.start[self.dim]
    }

    /// Numeric factorization of `p`, whose pattern must be covered by the
    /// analysed pattern.
    pub fn factor(self: &Arc<Self>, p: &SparsePrecision) -> Result<Cholesky> {
        if p.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {0}x{0}, analysis is for {1}",
                p.dim(),
                self.dim
            )));
        }
        let mut values = vec![0.0; self.envelope_size()];
        for i in 0..self.dim {
            let (cols, vals) = p.row(self.perm[i]);
            for (&c, &v) in cols.iter().zip(vals) {
                let j = self.inv[c];
                if j > i {
                    continue;
                }
                if j < self.first[i] {
                    return Err(Error::invalid("matrix pattern exceeds the analysed envelope"));
                }
                values[self.start[i] + j - self.first[i]] = v;
            }
        }
        let max_diag = p.diag().into_iter().fold(0.0, f64::max);
        self.factor_in_place(values, max_diag)
    }

    /// Numeric factorization reading entries from a dense symmetric matrix.
    pub fn factor_dense(self: &Arc<Self>, p: &Array2<f64>) -> Result<Cholesky> {
        if p.nrows() != self.dim || p.ncols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, analysis is for {}",
                p.nrows(),
                p.ncols(),
                self.dim
            )));
        }
        let mut values = vec![0.0; self.envelope_size()];
        let mut max_diag = 0.0f64;
        for i in 0..self.dim {
            let r = self.perm[i];
            max_diag = max_diag.max(p[[r, r]]);
            for j in self.first[i]..=i {
                values[self.start[i] + j - self.first[i]] = p[[r, self.perm[j]]];
            }
        }
        self.factor_in_place(values, max_diag)
    }

    /// Dense factorization with one retry after adding a ridge of
    /// `1e-8 · max diag` when the first attempt loses positive definiteness.
    /// The flag reports whether the ridge was needed.
    pub fn factor_dense_with_jitter(self: &Arc<Self>, p: &Array2<f64>) -> Result<(Cholesky, bool)> {
        match self.factor_dense(p) {
            Ok(f) => Ok((f, false)),
            Err(Error::NotPositiveDefinite { .. }) => {
                let max_diag = p.diag().iter().copied().fold(0.0, f64::max);
                let mut q = p.clone();
                for i in 0..self.dim {
                    q[[i, i]] += JITTER * max_diag;
                }
                self.factor_dense(&q).map(|f| (f, true))
            }
            Err(e) => Err(e),
        }
    }

    fn factor_in_place(self: &Arc<Self>, mut l: Vec<f64>, max_diag: f64) -> Result<Cholesky> {
        let tol = PIVOT_TOL * max_diag.max(f64::MIN_POSITIVE);
        for i in 0..self.dim {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let k0 = fi.max(fj);
                let mut s = l[si + j - fi];
                for k in k0..j {
                    s -= l[si + k - fi] * l[sj + k - fj];
                }
                l[si + j - fi] = s / l[sj + j - fj];
            }
            let mut d = l[si + i - fi];
            for k in fi..i {
                let v = l[si + k - fi];
                d -= v * v;
            }
            if !(d > tol) {
                return Err(Error::NotPositiveDefinite {
                    index: self.perm[i],
                    pivot: d,
                });
            }
            l[si + i - fi] = d.sqrt();
        }
        Ok(Cholesky {
            symbolic: Arc::clone(self),
            values: l,
        })
    }
}

/// Cholesky factor `L L' = P[perm, perm]` in envelope storage.
#[derive(Debug, Clone)]
pub struct Cholesky {
    symbolic: Arc<Symbolic>,
    values: Vec<f64>,
}

/// Factorizes with a reverse Cuthill–McKee ordering.
pub fn cholesky(p: &SparsePrecision) -> Result<Cholesky> {
    Arc::new(Symbolic::analyze(p, Ordering::ReverseCuthillMcKee)).factor(p)
}

impl Cholesky {
    pub fn dim(&self) -> usize {
        self.symbolic.dim
    }

    pub fn symbolic(&self) -> &Arc<Symbolic> {
        &self.symbolic
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        let s = &self.symbolic;
        if j < s.first[i] || j > i {
            0.0
        } else {
            self.values[s.start[i] + j - s.first[i]]
        }
    }

    /// Dense lower factor in the permuted ordering.
    pub fn lower_dense(&self) -> Array2<f64> {
        let n = self.dim();
        Array2::from_shape_fn((n, n), |(i, j)| self.at(i, j))
    }

    /// L L' mapped back to the original ordering.
    pub fn reconstruct(&self) -> Array2<f64> {
        let l = self.lower_dense();
        let llt = l.dot(&l.t());
        let n = self.dim();
        let perm = &self.symbolic.perm;
        let mut out = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                out[[perm[i], perm[j]]] = llt[[i, j]];
            }
        }
        out
    }

    pub fn log_det(&self) -> f64 {
        (0..self.dim())
            .map(|i| 2.0 * self.at(i, i).ln())
            .sum()
    }

    /// Solves L y = b in place (permuted coordinates).
    fn forward(&self, y: &mut [f64]) {
        let s = &self.symbolic;
        for i in 0..s.dim {
            let fi = s.first[i];
            let si = s.start[i];
            let mut acc = y[i];
            for k in fi..i {
                acc -= self.values[si + k - fi] * y[k];
            }
            y[i] = acc / self.values[si + i - fi];
        }
    }

    /// Solves L' x = y in place (permuted coordinates).
    fn backward(&self, x: &mut [f64]) {
        let s = &self.symbolic;
        for i in (0..s.dim).rev() {
            let fi = s.first[i];
            let si = s.start[i];
            x[i] /= self.values[si + i - fi];
            let xi = x[i];
            for k in fi..i {
                x[k] -= self.values[si + k - fi] * xi;
            }
        }
    }

    fn to_permuted(&self, b: &[f64]) -> Vec<f64> {
        self.symbolic.perm.iter().map(|&old| b[old]).collect()
    }

    fn unpermute(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for (new, &old) in self.symbolic.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }

    /// Solves P x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim());
        let mut y = self.to_permuted(b);
        self.forward(&mut y);
        self.backward(&mut y);
        self.unpermute(&y)
    }

    /// Returns `mean + L'^{-1} z` mapped to the original ordering, a draw
    /// from N(mean, P⁻¹) when `z` is standard normal.
    pub fn whiten_inverse(&self, mean: &[f64], z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.dim());
        let mut u = z.to_vec();
        self.backward(&mut u);
        let u = self.unpermute(&u);
        mean.iter().zip(&u).map(|(m, d)| m + d).collect()
    }

    /// ‖L'(x − mean)‖², the precision-weighted squared distance.
    pub fn mahalanobis(&self, x: &[f64], mean: &[f64]) -> f64 {
        let r: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
        let r = self.to_permuted(&r);
        let s = &self.symbolic;
        // (L' r)_k = Σ_{i ≥ k} L_ik r_i
        let mut t = vec![0.0; s.dim];
        for i in 0..s.dim {
            let fi = s.first[i];
            let si = s.start[i];
            for k in fi..=i {
                t[k] += self.values[si + k - fi] * r[i];
            }
        }
        t.iter().map(|v| v * v).sum()
    }
}

fn reverse_cuthill_mckee(graph: &[Vec<usize>]) -> Vec<usize> {
    let n = graph.len();
    let degree: Vec<usize> = graph.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let root = pseudo_peripheral(graph, seed, &degree);
        visited[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = graph[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

// George–Liu heuristic: repeat BFS from the farthest low-degree node.
fn pseudo_peripheral(graph: &[Vec<usize>], start: usize, degree: &[usize]) -> usize {
    let mut root = start;
    let mut ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(graph, root);
        let max_level = levels.iter().filter_map(|l| *l).max().unwrap_or(0);
        if max_level <= ecc && ecc > 0 {
            break;
        }
        ecc = max_level;
        let candidate = levels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Some(max_level))
            .min_by_key(|(v, _)| (degree[*v], *v))
            .map(|(v, _)| v)
            .unwrap_or(root);
        if candidate == root {
            break;
        }
        root = candidate;
    }
    root
}

fn bfs_levels(graph: &[Vec<usize>], root: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; graph.len()];
    level[root] = Some(0);
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let lv = level[v].unwrap();
        for &w in &graph[v] {
            if level[w].is_none() {
                level[w] = Some(lv + 1);
                queue.push_back(w);
            }
        }
    }
    level
}
