use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::blocks::{
    build_bspline_block, build_fixed_block, build_mrf_block, build_random_effect_block, build_varying_coefficient,
    DesignBlock,
};
use super::{AdjacencyMap, Dataset};
use crate::families::Family;
use crate::{Error, Result};

fn default_degree() -> usize {
    3
}

fn default_knots() -> usize {
    20
}

fn default_order() -> usize {
    2
}

fn default_true() -> bool {
    true
}

/// One additive term of a predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TermDef {
    /// Linear effect; joins the flat-prior fixed block.
    Linear { column: String },
    Pspline {
        column: String,
        #[serde(default = "default_degree")]
        degree: usize,
        #[serde(default = "default_knots")]
        knots: usize,
        #[serde(default = "default_order")]
        order: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<f64>,
    },
    /// Smooth of `column` multiplied by the numeric column `by`.
    Varying {
        column: String,
        by: String,
        #[serde(default = "default_degree")]
        degree: usize,
        #[serde(default = "default_knots")]
        knots: usize,
        #[serde(default = "default_order")]
        order: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<f64>,
    },
    Random {
        column: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<f64>,
    },
    Mrf {
        column: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<f64>,
    },
    /// Region effect with its own sub-predictor: region-level covariates
    /// plus structured (MRF) and unstructured (i.i.d.) components.
    Spatial {
        column: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        covariates: Vec<String>,
        #[serde(default = "default_true")]
        structured: bool,
        #[serde(default = "default_true")]
        unstructured: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        a: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<f64>,
    },
}

impl TermDef {
    /// Columns the term reads.
    pub fn columns(&self) -> Vec<&str> {
        match self {
            TermDef::Linear { column }
            | TermDef::Pspline { column, .. }
            | TermDef::Random { column, .. }
            | TermDef::Mrf { column, .. } => vec![column],
            TermDef::Varying { column, by, .. } => vec![column, by],
            TermDef::Spatial { column, covariates, .. } => {
                std::iter::once(column.as_str()).chain(covariates.iter().map(String::as_str)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorSpec {
    #[serde(default = "default_true")]
    pub intercept: bool,
    #[serde(default)]
    pub terms: Vec<TermDef>,
}

impl Default for PredictorSpec {
    fn default() -> Self {
        Self {
            intercept: true,
            terms: Vec::new(),
        }
    }
}

impl PredictorSpec {
    pub fn intercept_only() -> Self {
        Self::default()
    }

    pub fn with_term(mut self, term: TermDef) -> Self {
        self.terms.push(term);
        self
    }
}

/// Response family plus one predictor per distribution parameter, keyed by
/// parameter name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    pub predictors: BTreeMap<String, PredictorSpec>,
}

impl ModelSpec {
    /// Intercept-only predictors for every parameter.
    pub fn intercept_only(family: Family) -> Self {
        let predictors = family
            .param_names()
            .iter()
            .map(|n| (n.to_string(), PredictorSpec::default()))
            .collect();
        Self { family, predictors }
    }

    pub fn with_predictor(mut self, param: &str, spec: PredictorSpec) -> Self {
        self.predictors.insert(param.to_string(), spec);
        self
    }

    /// Same predictors under another family with matching parameter names
    /// where possible; unmatched parameters get intercept-only predictors.
    pub fn for_family(&self, family: Family) -> Self {
        let mut out = Self::intercept_only(family);
        for name in family.param_names() {
            if let Some(p) = self.predictors.get(*name) {
                out.predictors.insert(name.to_string(), p.clone());
            }
        }
        out
    }

    /// Predictors ordered by parameter index.
    pub fn ordered(&self) -> Result<Vec<(&'static str, &PredictorSpec)>> {
        let names = self.family.param_names();
        for key in self.predictors.keys() {
            if !names.contains(&key.as_str()) {
                return Err(Error::invalid(format!(
                    "predictor '{key}' is not a parameter of the {} family (expected {})",
                    self.family,
                    names.join(", ")
                )));
            }
        }
        names
            .iter()
            .map(|n| {
                self.predictors
                    .get(*n)
                    .map(|p| (*n, p))
                    .ok_or_else(|| Error::invalid(format!("missing predictor for parameter '{n}'")))
            })
            .collect()
    }

    /// Every column referenced by some term.
    pub fn columns(&self) -> Vec<String> {
        let mut seen = Vec::<String>::new();
        for p in self.predictors.values() {
            for t in &p.terms {
                for c in t.columns() {
                    if !seen.iter().any(|s| s == c) {
                        seen.push(c.to_string());
                    }
                }
            }
        }
        seen
    }
}

/// Blocks of one distribution parameter; the first block is the fixed
/// block when the predictor has an intercept or linear terms.
#[derive(Debug, Clone)]
pub struct AssembledPredictor {
    pub param: &'static str,
    pub blocks: Vec<DesignBlock>,
}

impl AssembledPredictor {
    /// η = Σ_j Z̃_j γ_j for coefficients concatenated in block order.
    pub fn eval(&self, coefs: &[f64]) -> Vec<f64> {
        let n = self.blocks.first().map_or(0, DesignBlock::n_obs);
        let mut eta = vec![0.0; n];
        let mut off = 0;
        for b in &self.blocks {
            let d = b.dim();
            b.raw_design().add_mul_to(&b.expand(&coefs[off..off + d]), &mut eta);
            off += d;
        }
        eta
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(DesignBlock::dim).sum()
    }

    pub fn block(&self, label: &str) -> Option<&DesignBlock> {
        self.blocks.iter().find(|b| b.label() == label)
    }
}

#[derive(Debug, Clone)]
pub struct AssembledModel {
    pub family: Family,
    pub predictors: Vec<AssembledPredictor>,
}

impl AssembledModel {
    pub fn n_obs(&self) -> usize {
        self.predictors
            .iter()
            .flat_map(|p| p.blocks.first())
            .map(DesignBlock::n_obs)
            .next()
            .unwrap_or(0)
    }
}

fn with_hyper(block: DesignBlock, a: Option<f64>, b: Option<f64>) -> Result<DesignBlock> {
    match (a, b) {
        (None, None) => Ok(block),
        _ => {
            let (da, db) = block.hyper();
            block.with_hyper(a.unwrap_or(da), b.unwrap_or(db))
        }
    }
}

/// Region-level covariate values must not vary within a region.
fn check_region_constant(data: &Dataset, region: &str, covariate: &str) -> Result<()> {
    let labels = data.labels(region)?;
    let values = data.numeric(covariate)?;
    let mut seen: HashMap<&str, f64> = HashMap::new();
    for (l, &v) in labels.iter().zip(values) {
        match seen.get(l.as_str()) {
            Some(&u) if u != v => {
                return Err(Error::invalid(format!(
                    "region-level covariate '{covariate}' varies within region '{l}'"
                )))
            }
            _ => {
                seen.insert(l, v);
            }
        }
    }
    Ok(())
}

fn audit_full_rank(block: &DesignBlock, param: &str) -> Result<()> {
    // modified Gram-Schmidt on the columns
    let z = block.raw_design().to_dense();
    let names = block.coef_names();
    let mut basis: Vec<ndarray::Array1<f64>> = Vec::new();
    for (j, col) in z.columns().into_iter().enumerate() {
        let mut v = col.to_owned();
        let norm0 = v.dot(&v).sqrt();
        for q in &basis {
            let c = q.dot(&v);
            v.scaled_add(-c, q);
        }
        let norm = v.dot(&v).sqrt();
        if norm0 == 0.0 || norm <= 1e-10 * norm0 {
            return Err(Error::RankDeficient(format!(
                "fixed effects of '{param}': column '{}' is linearly dependent on the preceding ones",
                names[j]
            )));
        }
        basis.push(v / norm);
    }
    Ok(())
}

fn assemble_one(
    param: &'static str,
    spec: &PredictorSpec,
    data: &Dataset,
    adj: Option<&AdjacencyMap>,
) -> Result<AssembledPredictor> {
    let mut linear: Vec<String> = Vec::new();
    let mut blocks: Vec<DesignBlock> = Vec::new();
    let need_adj = |column: &str| {
        adj.ok_or_else(|| Error::invalid(format!("term on '{column}' requires an adjacency map")))
    };
    for term in &spec.terms {
        for c in term.columns() {
            if !data.has_column(c) {
                return Err(Error::UnknownColumn(c.to_string()));
            }
        }
        match term {
            TermDef::Linear { column } => linear.push(column.clone()),
            TermDef::Pspline {
                column,
                degree,
                knots,
                order,
                label,
                a,
                b,
            } => {
                let mut blk = build_bspline_block(column, data.numeric(column)?, *degree, *knots, *order)?.with_centering()?;
                if let Some(l) = label {
                    blk = blk.with_label(l.clone());
                }
                blocks.push(with_hyper(blk, *a, *b)?);
            }
            TermDef::Varying {
                column,
                by,
                degree,
                knots,
                order,
                label,
                a,
                b,
            } => {
                let base = build_bspline_block(column, data.numeric(column)?, *degree, *knots, *order)?.with_centering()?;
                let mut blk = build_varying_coefficient(&base, by, data.numeric(by)?)?;
                if let Some(l) = label {
                    blk = blk.with_label(l.clone());
                }
                blocks.push(with_hyper(blk, *a, *b)?);
            }
            TermDef::Random { column, label, a, b } => {
                let mut blk = build_random_effect_block(column, &data.labels(column)?, None)?;
                if let Some(l) = label {
                    blk = blk.with_label(l.clone());
                }
                blocks.push(with_hyper(blk, *a, *b)?);
            }
            TermDef::Mrf { column, label, a, b } => {
                let mut blk = build_mrf_block(column, &data.labels(column)?, need_adj(column)?)?.with_centering()?;
                if let Some(l) = label {
                    blk = blk.with_label(l.clone());
                }
                blocks.push(with_hyper(blk, *a, *b)?);
            }
            TermDef::Spatial {
                column,
                covariates,
                structured,
                unstructured,
                a,
                b,
            } => {
                let map = need_adj(column)?;
                let labels = data.labels(column)?;
                for c in covariates {
                    check_region_constant(data, column, c)?;
                    linear.push(c.clone());
                }
                if *structured {
                    let blk = build_mrf_block(column, &labels, map)?.with_centering()?;
                    blocks.push(with_hyper(blk, *a, *b)?);
                }
                if *unstructured {
                    let blk = build_random_effect_block(column, &labels, Some(map.regions().to_vec()))?;
                    blocks.push(with_hyper(blk, *a, *b)?);
                }
                if !structured && !unstructured && covariates.is_empty() {
                    return Err(Error::invalid(format!("spatial term on '{column}' has no components")));
                }
            }
        }
    }

    let mut dup = HashSet::new();
    for c in &linear {
        if !dup.insert(c.as_str()) {
            return Err(Error::invalid(format!("duplicate linear term '{c}' in predictor '{param}'")));
        }
    }
    if spec.intercept || !linear.is_empty() {
        let fixed = build_fixed_block(data, &linear, spec.intercept)?;
        audit_full_rank(&fixed, param)?;
        blocks.insert(0, fixed);
    }
    let mut labels = HashSet::new();
    for b in &blocks {
        if !labels.insert(b.label().to_string()) {
            return Err(Error::invalid(format!(
                "duplicate term label '{}' in predictor '{param}'",
                b.label()
            )));
        }
    }
    if blocks.is_empty() {
        return Err(Error::invalid(format!("predictor '{param}' has no terms")));
    }
    Ok(AssembledPredictor { param, blocks })
}

/// Builds all blocks for every distribution parameter.
pub fn assemble_predictors(spec: &ModelSpec, data: &Dataset, adj: Option<&AdjacencyMap>) -> Result<AssembledModel> {
    if data.n_rows() == 0 {
        return Err(Error::invalid("empty dataset"));
    }
    let predictors = spec
        .ordered()?
        .into_iter()
        .map(|(param, p)| assemble_one(param, p, data, adj))
        .collect::<Result<Vec<_>>>()?;
    Ok(AssembledModel {
        family: spec.family,
        predictors,
    })
}
