//! Design matrices, penalties and identifiability constraints for every
//! effect type, and their assembly into per-parameter predictors.

mod adjacency;
mod assemble;
mod blocks;
mod bspline;
mod data;
mod sparse_rows;

pub use adjacency::AdjacencyMap;
pub use assemble::{assemble_predictors, AssembledModel, AssembledPredictor, ModelSpec, PredictorSpec, TermDef};
pub use blocks::{
    build_bspline_block, build_difference_penalty, build_fixed_block, build_mrf_block, build_random_effect_block,
    build_varying_coefficient, Basis, Constraint, DesignBlock, EffectKind, DEFAULT_HYPER,
};
pub use bspline::BSplineBasis;
pub use data::{Column, Dataset};
pub use sparse_rows::{CrossprodPlan, SparseRows};
