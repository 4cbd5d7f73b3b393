//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by depth computations, classifiers, simulation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// A curve's length does not match the grid it is evaluated on, or two
    /// samples live on different grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A group label has no curves assigned to it.
    #[error("empty group: label {0}")]
    EmptyGroup(u8),

    /// A curve or grid contains NaN or infinite values.
    #[error("non-finite value: {0}")]
    NonFiniteValue(String),

    /// A kernel bandwidth is zero or negative.
    #[error("degenerate bandwidth: {0}")]
    DegenerateBandwidth(String),

    /// The query curve coincides with a sample curve where the operation
    /// requires strictly positive distances.
    #[error("zero distance between query and sample curve {0}")]
    ZeroDistance(usize),

    /// Not enough curves (or values) for the requested operation.
    #[error("insufficient sample: {0}")]
    InsufficientSample(String),

    /// Too few domain points for spline interpolation.
    #[error("insufficient points: {0}")]
    InsufficientPoints(String),

    /// A curve index is outside the sample.
    #[error("index {index} out of range for sample of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    /// Malformed input file.
    #[error("parse error at line {line}: {message}")]
    ParseError { line: usize, message: String },

    /// The domain header of a curve file is not strictly increasing.
    #[error("domain values are not strictly increasing at position {0}")]
    DomainNotIncreasing(usize),

    /// Covariance factorization failed even after jitter escalation.
    #[error("covariance factorization failed after {0} jitter escalations")]
    FactorizationFailure(usize),

    /// Weighted-average classification with all-zero depth weights.
    #[error("zero depth weights in group {0}")]
    ZeroWeights(u8),

    /// Invalid hyperparameter combination or malformed configuration.
    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
