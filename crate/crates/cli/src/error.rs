use std::path::PathBuf;

use crone_core::CroneError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Core(#[from] CroneError),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for analysis-negative outcomes, 2 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CroneError::Diverged { .. })
            | CliError::Core(CroneError::SingularMatrix { .. })
            | CliError::Core(CroneError::OustaloupTolerance { .. }) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
