use thiserror::Error;

/// Errors produced by scoring, selection, surrogate fitting and campaigns.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid kernel matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPositiveSemidefinite { eigenvalue: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("index {index} out of range for {len} items")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("index {0} appears more than once")]
    DuplicateIndex(usize),

    #[error("batch of {requested} exceeds the {available} available candidates")]
    BatchTooLarge { requested: usize, available: usize },

    #[error("Cholesky factorization failed even with jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("negative posterior variance {0:e}")]
    NegativeVariance(f64),

    #[error("item {0} was already queried")]
    RepeatedQuery(usize),

    #[error("pool exhausted: {0}")]
    PoolExhausted(String),
}

pub type Result<T> = std::result::Result<T, Error>;
