use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// A malformed line in one of the text formats.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct FormatError {
    pub line: usize,
    pub msg: String,
}

impl FormatError {
    pub fn new(line: usize, msg: impl Into<String>) -> Self {
        FormatError { line, msg: msg.into() }
    }
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{}: {source}", path.display())]
    Parse { path: PathBuf, source: FormatError },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Core(#[from] cycletrack_core::Error),
    #[error("{0}")]
    Runtime(String),
}

impl AppError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        AppError::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path, source: FormatError) -> Self {
        AppError::Parse { path: path.to_path_buf(), source }
    }

    /// Process exit status: 3 for unreadable inputs, 4 for bad
    /// configuration, 5 for failures while running. Usage errors exit with 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Parse { .. } => 3,
            AppError::Config(_) => 4,
            AppError::Io { .. } | AppError::Core(_) | AppError::Runtime(_) => 5,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
