use std::path::Path;

use thiserror::Error;

/// Failure classes with a fixed exit code each.
#[derive(Debug, Error)]
pub enum CliError {
    /// Missing or unreadable input, bad flags or config. Exit code 2.
    #[error("{0}")]
    Input(String),
    /// A stage failed on valid input. Exit code 1.
    #[error("{stage}: {msg}")]
    Analysis { stage: String, msg: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Analysis { .. } => 1,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn at(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }

    pub fn analysis(stage: &str, err: impl std::fmt::Display) -> Self {
        CliError::Analysis {
            stage: stage.to_string(),
            msg: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
