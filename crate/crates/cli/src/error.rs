use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or input documents. Exit code 2.
    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Engine(#[from] avparse::Error),

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Engine and oracle disagree.
    #[error("verification failed: {0}")]
    Mismatch(String),

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::Engine(_) => 2,
            CliError::Write { .. } | CliError::Mismatch(_) | CliError::Internal(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
