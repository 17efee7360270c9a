use std::path::PathBuf;

use thiserror::Error;
use wordalign::AlignError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] AlignError),
}

impl CliError {
    /// 2 for bad input or configuration, 1 for failures of the environment.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Core(e) if e.is_runtime() => 1,
            _ => 2,
        }
    }
}
