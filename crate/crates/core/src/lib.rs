//! Bayesian structured additive distributional regression.
//!
//! Every parameter of a response distribution gets its own additive
//! predictor built from penalized basis expansions (P-splines, varying
//! coefficients, i.i.d. random effects, Markov random fields and flat-prior
//! linear effects). Posterior inference is blockwise Metropolis-Hastings
//! with iteratively weighted least squares proposals plus Gibbs updates of
//! the smoothing variances. Fitted models are assessed with DIC, quantile
//! residuals and proper scoring rules, and summarised through derived
//! distributional quantities such as moments and Gini coefficients.

#![allow(clippy::needless_range_loop, clippy::too_many_arguments, clippy::neg_cmp_op_on_partial_ord)]

mod error;
pub mod derived;
pub mod design;
pub mod families;
pub mod fitted;
pub mod linalg;
pub mod modelsel;
pub mod quadrature;
pub mod sampler;
pub mod special;

pub use error::{Error, Result};
pub use families::{Family, ParamVector};
