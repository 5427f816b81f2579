use std::path::PathBuf;

use thiserror::Error;

/// Failures surfaced by the command-line tool, each mapped to one exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] flatpoly_core::Error),

    #[error("{solver} solve ended with status {status}")]
    NotOptimal { solver: &'static str, status: &'static str },
}

impl CliError {
    /// 1 for a non-optimal solve, 3 for a cost that is not positive definite,
    /// 2 for every input, shape and IO problem.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::NotOptimal { .. } => 1,
            CliError::Core(flatpoly_core::Error::NotPositiveDefinite { .. }) => 3,
            _ => 2,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
