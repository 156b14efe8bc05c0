use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{source_name}:{line}: {message}")]
    Parse { source_name: String, line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] occtime::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    /// A library error raised while building models from the configuration.
    pub(crate) fn invalid(err: occtime::Error) -> Self {
        CliError::Validation(err.to_string())
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
