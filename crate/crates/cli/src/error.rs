use std::path::PathBuf;

use jacobi_greedy::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("fit has no points")]
    EmptyFit,
}

impl CliError {
    /// 2 for configuration and I/O problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(
                Error::NonConvergence { .. }
                | Error::EigenSolver { .. }
                | Error::Overflow { .. }
                | Error::Evaluation { .. },
            )
            | CliError::EmptyFit => 3,
            _ => 2,
        }
    }
}
