use std::collections::HashMap;

use ndarray::{Array1, Array2};

use super::{AdjacencyMap, BSplineBasis, Dataset, SparseRows};
use crate::linalg::SparsePrecision;
use crate::{Error, Result};

/// Default inverse-gamma hyperparameters for smoothing variances.
pub const DEFAULT_HYPER: (f64, f64) = (0.001, 0.001);

/// How a block's columns are generated from covariates; kept so the same
/// basis can be evaluated on new data.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    /// Flat-prior linear effects, optionally with a leading intercept column.
    Fixed { columns: Vec<String>, intercept: bool },
    Spline { column: String, spline: BSplineBasis },
    /// A basis multiplied row-wise by a numeric interaction column.
    Varying { base: Box<Basis>, by: String },
    /// Indicator columns for the labels of a grouping or region column.
    Levels { column: String, labels: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectKind {
    Fixed,
    PSpline { order: usize },
    Varying { order: usize },
    Random,
    Mrf,
}

/// Sum-to-zero reparameterization `β = Qγ` with `Q` an orthonormal basis of
/// the complement of the column-sum vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    q: Array2<f64>,
}

impl Constraint {
    pub fn from_direction(c: &[f64]) -> Result<Self> {
        let d = c.len();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::invalid("centering direction is zero"));
        }
        if d < 2 {
            return Err(Error::invalid("constraint would leave an empty block"));
        }
        let mut u = Array1::from(c.to_vec());
        u[0] += if c[0] >= 0.0 { norm } else { -norm };
        let uu = u.dot(&u);
        let mut q = Array2::zeros((d, d - 1));
        for i in 0..d {
            for j in 1..d {
                let h = if i == j { 1.0 } else { 0.0 } - 2.0 * u[i] * u[j] / uu;
                q[[i, j - 1]] = h;
            }
        }
        Ok(Self { q })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.q
    }

    /// Orthogonal projection of raw coefficients onto the constraint set.
    pub fn project(&self, beta: &[f64]) -> Vec<f64> {
        let b = Array1::from(beta.to_vec());
        self.q.dot(&self.q.t().dot(&b)).to_vec()
    }
}

/// One additive term: design, penalty, constraint and hyperparameters.
#[derive(Debug, Clone)]
pub struct DesignBlock {
    label: String,
    kind: EffectKind,
    basis: Basis,
    z: SparseRows,
    penalty: Option<SparsePrecision>,
    rank: usize,
    constraint: Option<Constraint>,
    effective_penalty: Array2<f64>,
    hyper: (f64, f64),
}

impl DesignBlock {
    fn new(
        label: String,
        kind: EffectKind,
        basis: Basis,
        z: SparseRows,
        penalty: Option<SparsePrecision>,
        rank: usize,
    ) -> Self {
        let d = z.ncols();
        let effective_penalty = penalty.as_ref().map_or_else(|| Array2::zeros((d, d)), |k| k.to_dense());
        Self {
            label,
            kind,
            basis,
            z,
            penalty,
            rank,
            constraint: None,
            effective_penalty,
            hyper: DEFAULT_HYPER,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn kind(&self) -> EffectKind {
        self.kind
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn hyper(&self) -> (f64, f64) {
        self.hyper
    }

    pub fn with_hyper(mut self, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::invalid(format!("inverse-gamma hyperparameters must be positive, got ({a}, {b})")));
        }
        self.hyper = (a, b);
        Ok(self)
    }

    /// Raw (unconstrained) design matrix.
    pub fn raw_design(&self) -> &SparseRows {
        &self.z
    }

    pub fn raw_dim(&self) -> usize {
        self.z.ncols()
    }

    /// Number of coefficients actually sampled.
    pub fn dim(&self) -> usize {
        self.constraint.as_ref().map_or(self.raw_dim(), |c| c.q.ncols())
    }

    pub fn n_obs(&self) -> usize {
        self.z.nrows()
    }

    /// Raw penalty matrix; `None` for flat priors.
    pub fn penalty(&self) -> Option<&SparsePrecision> {
        self.penalty.as_ref()
    }

    pub fn is_penalized(&self) -> bool {
        self.penalty.is_some()
    }

    pub fn penalty_rank(&self) -> usize {
        self.rank
    }

    pub fn constraint(&self) -> Option<&Constraint> {
        self.constraint.as_ref()
    }

    /// Penalty in the sampled coordinates, `Q'KQ` when constrained.
    pub fn effective_penalty(&self) -> &Array2<f64> {
        &self.effective_penalty
    }

    /// Applies the sum-to-zero constraint on the fitted values. Idempotent.
    pub fn with_centering(mut self) -> Result<Self> {
        if self.constraint.is_some() {
            return Ok(self);
        }
        if self.raw_dim() < 2 {
            return Err(Error::invalid(format!("centering block '{}' would leave it empty", self.label)));
        }
        let c = self.z.column_sums();
        let con = Constraint::from_direction(&c)
            .map_err(|e| Error::invalid(format!("block '{}': {e}", self.label)))?;
        if let Some(k) = &self.penalty {
            let kd = k.to_dense();
            self.effective_penalty = con.q.t().dot(&kd).dot(&con.q);
        } else {
            self.effective_penalty = Array2::zeros((con.q.ncols(), con.q.ncols()));
        }
        self.constraint = Some(con);
        Ok(self)
    }

    /// Maps sampled coefficients to raw basis coefficients.
    pub fn expand(&self, gamma: &[f64]) -> Vec<f64> {
        assert_eq!(gamma.len(), self.dim());
        match &self.constraint {
            Some(c) => c.q.dot(&Array1::from(gamma.to_vec())).to_vec(),
            None => gamma.to_vec(),
        }
    }

    /// Fitted values Z̃γ on the training rows.
    pub fn contribution(&self, gamma: &[f64]) -> Vec<f64> {
        self.z.mul_vec(&self.expand(gamma))
    }

    /// Design rows for new data, in raw coordinates.
    pub fn design_rows(&self, data: &Dataset, allow_extrapolation: bool) -> Result<SparseRows> {
        basis_rows(&self.basis, self.kind, data, allow_extrapolation)
    }

    /// Fitted values for new data.
    pub fn predict(&self, data: &Dataset, gamma: &[f64], allow_extrapolation: bool) -> Result<Vec<f64>> {
        Ok(self.design_rows(data, allow_extrapolation)?.mul_vec(&self.expand(gamma)))
    }

    /// Per row of `data`: whether every spline covariate lies inside the
    /// training range.
    pub fn rows_in_range(&self, data: &Dataset) -> Result<Vec<bool>> {
        let mut ok = vec![true; data.n_rows()];
        if let Some((column, spline)) = spline_of(&self.basis) {
            for (flag, &x) in ok.iter_mut().zip(data.numeric(column)?) {
                *flag = spline.contains(x);
            }
        }
        Ok(ok)
    }

    /// One name per sampled coefficient, for output headers.
    pub fn coef_names(&self) -> Vec<String> {
        match (&self.basis, &self.constraint) {
            (Basis::Fixed { columns, intercept }, None) => {
                let lead = intercept.then(|| "(Intercept)".to_string());
                lead.into_iter().chain(columns.iter().cloned()).collect()
            }
            (Basis::Levels { labels, .. }, None) => labels.iter().map(|l| format!("{}[{l}]", self.label)).collect(),
            _ => (0..self.dim()).map(|i| format!("{}[{}]", self.label, i + 1)).collect(),
        }
    }

    /// Smooth-term covariate and its training range, if any.
    pub fn covariate_range(&self) -> Option<(&str, f64, f64)> {
        spline_of(&self.basis).map(|(c, s)| (c, s.lo, s.hi))
    }
}

fn spline_of(basis: &Basis) -> Option<(&str, &BSplineBasis)> {
    match basis {
        Basis::Spline { column, spline } => Some((column.as_str(), spline)),
        Basis::Varying { base, .. } => spline_of(base),
        _ => None,
    }
}

fn basis_rows(basis: &Basis, kind: EffectKind, data: &Dataset, allow_extrapolation: bool) -> Result<SparseRows> {
    match basis {
        Basis::Fixed { columns, intercept } => {
            let cols: Vec<&[f64]> = columns.iter().map(|c| data.numeric(c)).collect::<Result<_>>()?;
            let p = cols.len() + *intercept as usize;
            let mut z = SparseRows::new(p);
            for i in 0..data.n_rows() {
                let lead = intercept.then_some((0, 1.0));
                let off = *intercept as usize;
                z.push_row(lead.into_iter().chain(cols.iter().enumerate().map(|(j, c)| (j + off, c[i]))));
            }
            Ok(z)
        }
        Basis::Spline { column, spline } => {
            let x = data.numeric(column)?;
            let mut z = SparseRows::new(spline.n_basis());
            for &xi in x {
                if !allow_extrapolation && !spline.contains(xi) {
                    return Err(Error::Extrapolation {
                        column: column.clone(),
                        value: xi,
                        lo: spline.lo,
                        hi: spline.hi,
                    });
                }
                let (first, vals) = spline.eval(xi);
                z.push_row(vals.into_iter().enumerate().map(|(k, v)| (first + k, v)));
            }
            Ok(z)
        }
        Basis::Varying { base, by } => {
            let zc = data.numeric(by)?;
            Ok(basis_rows(base, kind, data, allow_extrapolation)?.scale_rows(zc))
        }
        Basis::Levels { column, labels } => {
            let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
            let obs = data.labels(column)?;
            let mut z = SparseRows::new(labels.len());
            for label in &obs {
                match index.get(label.as_str()) {
                    Some(&j) => z.push_row([(j, 1.0)]),
                    // unseen groups get the prior mean of a random effect
                    None if kind == EffectKind::Random => z.push_row([]),
                    None => return Err(Error::UnknownRegion(label.clone())),
                }
            }
            Ok(z)
        }
    }
}

/// `D'D` for the difference matrix `D` of the given order on `d_cols`
/// coefficients. Its null space holds polynomials of degree `< order` in the
/// coefficient index.
pub fn build_difference_penalty(d_cols: usize, order: usize) -> Result<SparsePrecision> {
    if order == 0 || order >= d_cols {
        return Err(Error::invalid(format!(
            "difference order must satisfy 1 <= order < {d_cols}, got {order}"
        )));
    }
    // rows of the difference matrix: binomial coefficients with alternating signs
    let mut stencil = vec![1.0];
    for _ in 0..order {
        let mut next = vec![0.0; stencil.len() + 1];
        for (i, &s) in stencil.iter().enumerate() {
            next[i] -= s;
            next[i + 1] += s;
        }
        stencil = next;
    }
    let mut dense = Array2::<f64>::zeros((d_cols, d_cols));
    for r in 0..(d_cols - order) {
        for (a, &sa) in stencil.iter().enumerate() {
            for (b, &sb) in stencil.iter().enumerate() {
                dense[[r + a, r + b]] += sa * sb;
            }
        }
    }
    SparsePrecision::from_dense(&dense)
}

/// P-spline block with a random-walk penalty of the given order.
pub fn build_bspline_block(
    column: &str,
    x: &[f64],
    degree: usize,
    inner_knots: usize,
    penalty_order: usize,
) -> Result<DesignBlock> {
    if let Some(row) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            column: column.to_string(),
            row,
        });
    }
    if penalty_order == 0 || inner_knots < penalty_order + 1 {
        return Err(Error::invalid(format!(
            "need inner_knots >= penalty_order + 1 and penalty_order >= 1 (got {inner_knots}, {penalty_order})"
        )));
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if x.is_empty() || lo == hi {
        return Err(Error::DegenerateCovariate(column.to_string()));
    }
    let spline = BSplineBasis::new(degree, inner_knots, lo, hi)?;
    let d = spline.n_basis();
    let mut z = SparseRows::new(d);
    for &xi in x {
        let (first, vals) = spline.eval(xi);
        z.push_row(vals.into_iter().enumerate().map(|(k, v)| (first + k, v)));
    }
    let k = build_difference_penalty(d, penalty_order)?;
    Ok(DesignBlock::new(
        format!("s({column})"),
        EffectKind::PSpline { order: penalty_order },
        Basis::Spline {
            column: column.to_string(),
            spline,
        },
        z,
        Some(k),
        d - penalty_order,
    ))
}

/// i.i.d. Gaussian random effect for a grouping column. `levels` fixes the
/// level set (and order); by default the sorted distinct observed labels.
pub fn build_random_effect_block(column: &str, labels: &[String], levels: Option<Vec<String>>) -> Result<DesignBlock> {
    let levels = match levels {
        Some(l) => l,
        None => {
            let set: std::collections::BTreeSet<&String> = labels.iter().collect();
            set.into_iter().cloned().collect()
        }
    };
    if levels.len() < 2 {
        return Err(Error::invalid(format!(
            "random effect '{column}' needs at least two levels, found {}",
            levels.len()
        )));
    }
    let basis = Basis::Levels {
        column: column.to_string(),
        labels: levels.clone(),
    };
    let index: HashMap<&str, usize> = levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut z = SparseRows::new(levels.len());
    for l in labels {
        let j = *index
            .get(l.as_str())
            .ok_or_else(|| Error::invalid(format!("label '{l}' not among the declared levels of '{column}'")))?;
        z.push_row([(j, 1.0)]);
    }
    let g = levels.len();
    Ok(DesignBlock::new(
        format!("re({column})"),
        EffectKind::Random,
        basis,
        z,
        Some(SparsePrecision::identity(g)),
        g,
    ))
}

/// Markov random field over the regions of `adj`; the penalty is the graph
/// Laplacian with rank `S − #components`.
pub fn build_mrf_block(column: &str, labels: &[String], adj: &AdjacencyMap) -> Result<DesignBlock> {
    let mut z = SparseRows::new(adj.n_regions());
    let mut observed = vec![false; adj.n_regions()];
    for l in labels {
        let s = adj.index_of(l).ok_or_else(|| Error::UnknownRegion(l.clone()))?;
        observed[s] = true;
        z.push_row([(s, 1.0)]);
    }
    if let Some(s) = (0..adj.n_regions()).find(|&s| adj.is_island(s) && !observed[s]) {
        return Err(Error::invalid(format!(
            "region '{}' has neither observations nor neighbours; its effect is not identified",
            adj.regions()[s]
        )));
    }
    let rank = adj.n_regions() - adj.n_components();
    Ok(DesignBlock::new(
        format!("mrf({column})"),
        EffectKind::Mrf,
        Basis::Levels {
            column: column.to_string(),
            labels: adj.regions().to_vec(),
        },
        z,
        Some(adj.laplacian()),
        rank,
    ))
}

/// Varying coefficient `z · f(x)`: the base design scaled row-wise by `z`,
/// sharing the base penalty and constraint.
pub fn build_varying_coefficient(base: &DesignBlock, by: &str, z: &[f64]) -> Result<DesignBlock> {
    if z.len() != base.n_obs() {
        return Err(Error::DimensionMismatch(format!(
            "interaction column '{by}' has {} rows, base block has {}",
            z.len(),
            base.n_obs()
        )));
    }
    if let Some(row) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            column: by.to_string(),
            row,
        });
    }
    let order = match base.kind {
        EffectKind::PSpline { order } | EffectKind::Varying { order } => order,
        _ => 0,
    };
    let mut block = base.clone();
    block.z = base.z.scale_rows(z);
    block.kind = EffectKind::Varying { order };
    block.basis = Basis::Varying {
        base: Box::new(base.basis.clone()),
        by: by.to_string(),
    };
    block.label = format!("{}:{by}", base.label);
    Ok(block)
}

/// Flat-prior block of linear effects.
pub fn build_fixed_block(data: &Dataset, columns: &[String], intercept: bool) -> Result<DesignBlock> {
    let basis = Basis::Fixed {
        columns: columns.to_vec(),
        intercept,
    };
    if columns.is_empty() && !intercept {
        return Err(Error::invalid("fixed-effects block without columns"));
    }
    let z = basis_rows(&basis, EffectKind::Fixed, data, true)?;
    Ok(DesignBlock::new("fixed".into(), EffectKind::Fixed, basis, z, None, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_order_penalty_on_three() {
        let k = build_difference_penalty(3, 1).unwrap().to_dense();
        let expect = ndarray::array![[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        assert_eq!(k, expect);
        let ones = [1.0; 3];
        assert_eq!(build_difference_penalty(3, 1).unwrap().quad_form(&ones), 0.0);
    }

    #[test]
    fn second_order_penalty_annihilates_linear_sequence() {
        let k = build_difference_penalty(5, 2).unwrap();
        let v = k.mul_vec(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(v.iter().all(|x| *x == 0.0));
        assert!(build_difference_penalty(4, 4).is_err());
        assert!(build_difference_penalty(4, 0).is_err());
    }

    #[test]
    fn random_effect_block_counts() {
        let labels: Vec<String> = ["a", "a", "b", "a", "b"].iter().map(|s| s.to_string()).collect();
        let b = build_random_effect_block("g", &labels, None).unwrap();
        assert_eq!(b.raw_design().column_sums(), vec![3.0, 2.0]);
        assert_eq!(b.penalty_rank(), 2);
        let single = vec!["x".to_string(); 4];
        assert!(build_random_effect_block("g", &single, None).is_err());
    }

    #[test]
    fn ten_level_identity_penalty() {
        let labels: Vec<String> = (0..30).map(|i| format!("g{}", i % 10)).collect();
        let b = build_random_effect_block("g", &labels, None).unwrap();
        assert_eq!(b.penalty().unwrap().to_dense(), Array2::eye(10));
        let beta: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin()).collect();
        let q = b.penalty().unwrap().quad_form(&beta);
        assert!((q - beta.iter().map(|v| v * v).sum::<f64>()).abs() < 1e-14);
    }

    #[test]
    fn path_graph_laplacian() {
        let adj = AdjacencyMap::parse("1: 2\n2: 1,3\n3: 2\n").unwrap();
        let labels: Vec<String> = ["1", "2", "3", "2"].iter().map(|s| s.to_string()).collect();
        let b = build_mrf_block("s", &labels, &adj).unwrap();
        let expect = ndarray::array![[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        assert_eq!(b.penalty().unwrap().to_dense(), expect);
        assert_eq!(b.penalty_rank(), 2);
        assert_eq!(b.penalty().unwrap().quad_form(&[2.5, 2.5, 2.5]), 0.0);
        let bad: Vec<String> = vec!["4".into()];
        match build_mrf_block("s", &bad, &adj) {
            Err(Error::UnknownRegion(l)) => assert_eq!(l, "4"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn varying_coefficient_scales_rows() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let base = build_bspline_block("x", &x, 3, 5, 2).unwrap().with_centering().unwrap();
        let ones = vec![1.0; 20];
        let vc = build_varying_coefficient(&base, "d", &ones).unwrap();
        assert_eq!(vc.raw_design(), base.raw_design());
        let neg = vec![-1.0; 20];
        let vc = build_varying_coefficient(&base, "d", &neg).unwrap();
        assert_eq!(vc.raw_design().to_dense(), -base.raw_design().to_dense());
        assert_eq!(vc.effective_penalty(), base.effective_penalty());
        assert!(build_varying_coefficient(&base, "d", &[1.0; 3]).is_err());
    }

    #[test]
    fn bspline_errors() {
        assert!(matches!(
            build_bspline_block("x", &[2.0; 10], 3, 5, 2),
            Err(Error::DegenerateCovariate(_))
        ));
        assert!(matches!(
            build_bspline_block("x", &[1.0, f64::NAN, 2.0], 3, 5, 2),
            Err(Error::NonFinite { row: 1, .. })
        ));
    }

    #[test]
    fn centering_zeroes_fitted_mean_and_is_idempotent() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 * 0.1).collect();
        let b = build_bspline_block("x", &x, 3, 8, 2).unwrap().with_centering().unwrap();
        assert_eq!(b.dim(), b.raw_dim() - 1);
        let gamma: Vec<f64> = (0..b.dim()).map(|i| (i as f64).cos() * 3.0).collect();
        let f = b.contribution(&gamma);
        assert!((f.iter().sum::<f64>() / 50.0).abs() < 1e-10);
        let beta: Vec<f64> = (0..b.raw_dim()).map(|i| i as f64 * 0.7 - 2.0).collect();
        let con = b.constraint().unwrap();
        let once = con.project(&beta);
        let twice = con.project(&once);
        for (u, v) in once.iter().zip(&twice) {
            assert!((u - v).abs() < 1e-12);
        }
        let again = b.clone().with_centering().unwrap();
        assert_eq!(again.dim(), b.dim());
    }
}
