use thiserror::Error;

/// Errors from model construction and sampling.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("covariance matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("need at least 3 arms, got {k}")]
    TooFewArms { k: usize },
    #[error("covariance matrix is not symmetric at ({i},{j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("covariance matrix is not positive semi-definite (min eigenvalue {eigenvalue})")]
    NotPsd { eigenvalue: f64 },
    #[error("arm {arm} has non-positive variance")]
    NonPositiveVariance { arm: usize },
    #[error("invalid arm pair ({i},{j})")]
    InvalidPair { i: usize, j: usize },
    #[error("arm {arm} has zero variance, correlation undefined")]
    ZeroVariance { arm: usize },
    #[error("unknown built-in covariance id {id}")]
    UnknownId { id: usize },
    #[error("rho {rho} outside (0,1)")]
    RhoOutOfRange { rho: f64 },
    #[error("invalid transformation index {m} for {k} arms")]
    InvalidIndex { m: usize, k: usize },
    #[error("failed to parse matrix file: {0}")]
    Parse(String),
}

/// Errors from the pairwise statistics store.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("invalid arm pair ({i},{j})")]
    InvalidPair { i: usize, j: usize },
    #[error("no samples recorded for pair ({i},{j})")]
    NoSamples { i: usize, j: usize },
    #[error("degenerate variance sums for pair ({i},{j})")]
    DegenerateVariance { i: usize, j: usize },
    #[error("pair ({i},{j}) has no samples, cannot estimate MSE of arm {arm}")]
    MissingPair { i: usize, j: usize, arm: usize },
}

/// Errors from algorithm runs and bound evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgError {
    #[error("budget {budget} too small for {k} arms (need more than {min})")]
    BudgetTooSmall { budget: u64, k: usize, min: u64 },
    #[error("non-positive gap in bound parameters")]
    NonPositiveGap,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Errors from KL-divergence and lower-bound computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("matrix dimensions differ ({a} vs {b})")]
    DimensionMismatch { a: usize, b: usize },
    #[error("matrix is singular (determinant {det})")]
    SingularMatrix { det: f64 },
    #[error("empty sample set")]
    EmptySamples,
    #[error("all sub-optimal gaps must be positive")]
    DegenerateGaps,
    #[error(transparent)]
    Env(#[from] EnvError),
}
