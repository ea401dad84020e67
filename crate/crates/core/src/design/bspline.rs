use crate::{Error, Result};

/// B-spline basis on an equidistant knot grid.
///
/// `inner_knots` interior knots split `[lo, hi]` into `inner_knots + 1`
/// intervals of width `h`; `degree` further knots are placed outside each
/// boundary at the same spacing. The basis then has
/// `inner_knots + degree + 1` functions.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    pub degree: usize,
    pub inner_knots: usize,
    pub lo: f64,
    pub hi: f64,
}

impl BSplineBasis {
    pub fn new(degree: usize, inner_knots: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::invalid(format!("invalid spline range [{lo}, {hi}]")));
        }
        Ok(Self {
            degree,
            inner_knots,
            lo,
            hi,
        })
    }

    pub fn n_basis(&self) -> usize {
        self.inner_knots + self.degree + 1
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.inner_knots + 1) as f64
    }

    /// Full knot vector including the exterior knots.
    pub fn knots(&self) -> Vec<f64> {
        let h = self.spacing();
        let total = self.inner_knots + 2 + 2 * self.degree;
        (0..total)
            .map(|j| self.lo + (j as f64 - self.degree as f64) * h)
            .collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        // tolerate rounding at the boundary
        let eps = 1e-12 * (self.hi - self.lo);
        x >= self.lo - eps && x <= self.hi + eps
    }

    /// Non-zero basis values at `x`: index of the first non-zero function
    /// and the `degree + 1` values. Outside `[lo, hi]` the boundary
    /// polynomial pieces are continued.
    pub fn eval(&self, x: f64) -> (usize, Vec<f64>) {
        let p = self.degree;
        let h = self.spacing();
        let raw = ((x - self.lo) / h).floor();
        let interval = if raw.is_nan() {
            0
        } else {
            (raw.max(0.0) as usize).min(self.inner_knots)
        };
        // knot t_j = lo + (j − p)·h, span index s = interval + p
        let s = interval + p;
        let knot = |j: usize| self.lo + (j as f64 - p as f64) * h;
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = x - knot(s + 1 - j);
            right[j] = knot(s + j) - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        (interval, n)
    }
}
