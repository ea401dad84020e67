//! Sparse symmetric positive-definite factorizations and Gaussian sampling
//! in precision parameterization.
//!
//! Matrices are reordered with reverse Cuthill–McKee and factored in
//! envelope (profile) storage: all fill of a Cholesky factor stays inside the
//! envelope of the reordered matrix, so banded penalties and Markov random
//! field precisions stay cheap. The symbolic part (ordering and envelope)
//! depends only on the sparsity pattern and can be reused across numeric
//! factorizations.

mod cholesky;
mod mvn;
mod sparse;

pub use cholesky::{cholesky, Cholesky, Ordering, Symbolic};
pub use mvn::{mvn_logdensity, sample_mvn_precision, sample_mvn_precision_with_noise};
pub use sparse::SparsePrecision;
