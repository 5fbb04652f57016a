use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Everything a subcommand can fail with, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] scalepred::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    /// Bad flags, malformed config files, missing artifacts.
    #[error("{0}")]
    Invalid(String),
    /// The sampler disagreed with the quadrature oracle.
    #[error("{0}")]
    Check(String),
    #[error("cell {cell}: {source}")]
    Cell { cell: String, source: Box<CliError> },
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(scalepred::Error::Io(_)) | CliError::Io { .. } => EXIT_IO,
            CliError::Core(scalepred::Error::Numerical(_)) | CliError::Check(_) => EXIT_NUMERICAL,
            CliError::Core(_) | CliError::Invalid(_) => EXIT_VALIDATION,
            CliError::Cell { source, .. } => source.exit_code(),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
