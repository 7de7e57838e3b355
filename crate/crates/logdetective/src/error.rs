//! Error type shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogDetError {
    /// Mismatched or invalid dimensions (operator vs. vector/sketch shapes).
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// An input violates a structural precondition (asymmetry, negative
    /// eigenvalues beyond tolerance, zero start vector, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A quantity left the numerical domain of the requested function,
    /// e.g. a non-positive Ritz value fed to the logarithm.
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    /// A dense-oracle request exceeded the size guard.
    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    /// A matrix factorization could not be completed (after retries).
    #[error("factorization failed: {0}")]
    Factorization(String),

    /// Experiment configuration problems (parse errors, inconsistent fields).
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LogDetError>;
