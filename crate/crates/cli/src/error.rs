use fqa_core::FqaError;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or missing arguments; exits with status 2.
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: FqaError },
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Fqa(#[from] FqaError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// Attaches `path` to an error raised while reading it, unless the
    /// message already names the file.
    pub fn input(path: &Path, source: FqaError) -> Self {
        if source.to_string().contains(&path.display().to_string()) {
            CliError::Fqa(source)
        } else {
            CliError::Input {
                path: path.to_path_buf(),
                source,
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
