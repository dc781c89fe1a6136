use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("expected {expected} weights for {expected} marginals, found {found}")]
    WeightLengthMismatch { expected: usize, found: usize },

    #[error("marginal index {index} out of range for {num_marginals} marginals")]
    IndexOutOfRange { index: usize, num_marginals: usize },

    #[error("marginal index {0} selected twice")]
    DuplicateIndex(usize),

    #[error("transport solver exceeded its pivot budget after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("couplings disagree on the reference marginal: {0}")]
    MarginalMismatch(String),

    #[error("oracle size guard exceeded: {variables} variables > guard {guard}")]
    SizeGuard { variables: usize, guard: usize },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
