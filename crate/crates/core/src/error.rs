use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate covariate '{0}': fewer than two distinct values")]
    DegenerateCovariate(String),

    #[error("non-finite value in column '{column}' at row {row}")]
    NonFinite { column: String, row: usize },

    #[error("unknown column '{0}'")]
    UnknownColumn(String),

    #[error("unknown region '{0}'")]
    UnknownRegion(String),

    #[error("asymmetric adjacency: '{0}' lists '{1}' but not vice versa")]
    AsymmetricAdjacency(String, String),

    #[error("value {value} outside the support of the {family} distribution")]
    OutOfSupport { family: &'static str, value: f64 },

    #[error("parameter {name} = {value} is not inside the parameter space")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("probability {0} must lie strictly inside (0, 1)")]
    InvalidProbability(f64),

    #[error("matrix not positive definite: pivot {index} = {pivot:e}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("moment undefined for these parameters: {0}")]
    UndefinedMoment(String),

    #[error("covariate '{column}' value {value} outside training range [{lo}, {hi}]")]
    Extrapolation {
        column: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sampler aborted: {0}")]
    SamplerAborted(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
