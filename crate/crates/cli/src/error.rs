use std::path::{Path, PathBuf};

use momtopo::operators::ContainerError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Container { path: PathBuf, source: ContainerError },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Container { source: ContainerError::Io(_), .. } => 3,
            CliError::Container { .. } => 4,
            CliError::Numerical(_) => 5,
            CliError::Verify(_) => 6,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(vec![msg.into()])
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn numerical(e: impl ToString) -> Self {
        CliError::Numerical(e.to_string())
    }
}
