use fqa_tensor::TensorError;
use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, FqaError>;

#[derive(Debug, Error)]
pub enum FqaError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("checkpoint tensor `{tensor}`: {message}")]
    CheckpointTensor { tensor: String, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid network spec: {0}")]
    Spec(String),
    #[error("{0}")]
    Invalid(String),
}

impl FqaError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        FqaError::Invalid(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FqaError::Io { path: path.into(), source }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        FqaError::Image { path: path.into(), source }
    }
}
