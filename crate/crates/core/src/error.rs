use thiserror::Error;

/// Errors raised by the model, data, inference and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The caller asked for something that does not exist (unknown name, index, node count).
    #[error("usage error: {0}")]
    Usage(String),
    /// A model or sampler configuration is incomplete or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    /// Input data violates a data-set invariant.
    #[error("validation error: {0}")]
    Validation(String),
    /// Input data could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
