use ndarray::Array2;

/// Z' diag(w) Z as a scatter of precomputed row outer products.
#[derive(Debug, Clone)]
pub struct CrossprodPlan {
    dim: usize,
    row_ptr: Vec<usize>,
    index: Vec<usize>,
    value: Vec<f64>,
}

impl CrossprodPlan {
    pub fn apply(&self, w: &[f64]) -> Array2<f64> {
        let d = self.dim;
        assert_eq!(w.len() + 1, self.row_ptr.len());
        let mut a = Array2::zeros((d, d));
        let buf = a.as_slice_mut().expect("standard layout");
        for (i, &wi) in w.iter().enumerate() {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            for (&idx, &v) in self.index[r.clone()].iter().zip(&self.value[r]) {
                buf[idx] += wi * v;
            }
        }
        for r in 0..d {
            for c in 0..r {
                buf[r * d + c] = buf[c * d + r];
            }
        }
        a
    }
}

/// Row-compressed design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseRows {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            row_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (c, v) in entries {
            debug_assert!(c < self.ncols);
            self.cols.push(c);
            self.vals.push(v);
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.nrows(), self.ncols));
        for i in 0..self.nrows() {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                out[[i, j]] += x;
            }
        }
        out
    }

    /// Z·β.
    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.nrows())
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, &x)| x * beta[j]).sum()
            })
            .collect()
    }

    /// out += Z·β.
    pub fn add_mul_to(&self, beta: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            let mut acc = 0.0;
            for (&j, &x) in c.iter().zip(v) {
                acc += x * beta[j];
            }
            *o += acc;
        }
    }

    /// Z'v.
    pub fn t_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (i, &vi) in v.iter().enumerate() {
            let (c, x) = self.row(i);
            for (&j, &z) in c.iter().zip(x) {
                out[j] += z * vi;
            }
        }
        out
    }

    /// Z' diag(w) Z as a dense matrix.
    pub fn weighted_crossprod(&self, w: &[f64]) -> Array2<f64> {
        let d = self.ncols;
        let mut a = Array2::zeros((d, d));
        let buf = a.as_slice_mut().expect("standard layout");
        // upper triangle only, mirrored at the end
        for (i, &wi) in w.iter().enumerate() {
            let (c, x) = self.row(i);
            for (p, (&j, &zj)) in c.iter().zip(x).enumerate() {
                let s = wi * zj;
                buf[j * d + j] += s * zj;
                for (&k, &zk) in c[p + 1..].iter().zip(&x[p + 1..]) {
                    if k == j {
                        buf[j * d + j] += 2.0 * s * zk;
                    } else {
                        let (lo, hi) = if j < k { (j, k) } else { (k, j) };
                        buf[lo * d + hi] += s * zk;
                    }
                }
            }
        }
        for r in 0..d {
            for c in 0..r {
                buf[r * d + c] = buf[c * d + r];
            }
        }
        a
    }

    /// Precomputes the per-row outer products used by
    /// [`CrossprodPlan::apply`].
    pub fn crossprod_plan(&self) -> CrossprodPlan {
        let d = self.ncols;
        let mut row_ptr = Vec::with_capacity(self.nrows() + 1);
        let mut index = Vec::new();
        let mut value = Vec::new();
        row_ptr.push(0);
        for i in 0..self.nrows() {
            let (c, x) = self.row(i);
            for (p, (&j, &zj)) in c.iter().zip(x).enumerate() {
                for (q, (&k, &zk)) in c[p..].iter().zip(&x[p..]).enumerate() {
                    let (lo, hi) = if j <= k { (j, k) } else { (k, j) };
                    // a repeated column meets itself twice off the position diagonal
                    let factor = if q > 0 && j == k { 2.0 } else { 1.0 };
                    index.push(lo * d + hi);
                    value.push(zj * zk * factor);
                }
            }
            row_ptr.push(index.len());
        }
        CrossprodPlan {
            dim: d,
            row_ptr,
            index,
            value,
        }
    }

    /// Scales every row by the matching entry of `z`.
    pub fn scale_rows(&self, z: &[f64]) -> SparseRows {
        let mut out = self.clone();
        for (i, &zi) in z.iter().enumerate() {
            for v in &mut out.vals[self.row_ptr[i]..self.row_ptr[i + 1]] {
                *v *= zi;
            }
        }
        out
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.t_mul_vec(&vec![1.0; self.nrows()])
    }
}
