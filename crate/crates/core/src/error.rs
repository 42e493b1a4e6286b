//! Error type shared by all engine modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("cumulative information matrix is singular: {0}")]
    SingularCumulative(String),
    #[error("ridge penalty must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("cumulative design is still rank deficient after removing the ridge term")]
    StillDeficient,
    #[error("insufficient data: need more than {need} observations, have {have}")]
    InsufficientData { need: usize, have: usize },
    #[error("insufficient history: previous accumulation point has {have} observations for {p} parameters")]
    InsufficientHistory { have: usize, p: usize },
    #[error("contrast matrix is rank deficient")]
    RankDeficientContrast,
    #[error("subgroup scheme mismatch: {0}")]
    SchemeMismatch(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("iteration did not converge after {0} iterations")]
    NotConverged(usize),
    #[error("data separation detected in chunk fit")]
    Separation,
    #[error("linear predictor outside the family domain: {0}")]
    DomainViolation(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
