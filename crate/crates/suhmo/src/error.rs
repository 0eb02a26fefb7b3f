use std::path::PathBuf;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum SuhmoError {
    #[error("{primitive}: incompatible shapes {shapes}")]
    ShapeMismatch { primitive: String, shapes: String },

    #[error("backward requires a scalar loss, got shape {0}")]
    NonScalarLoss(String),

    #[error("{path}: bad magic, expected {expected:?}")]
    BadMagic { path: PathBuf, expected: &'static str },

    #[error("{path}: truncated payload, expected {expected} bytes, got {actual}")]
    Truncated { path: PathBuf, expected: usize, actual: usize },

    #[error("{path}: non-finite value at element {index}")]
    NonFinite { path: PathBuf, index: usize },

    #[error("{path}: unsupported format version {version}")]
    BadVersion { path: PathBuf, version: u32 },

    #[error("{path}: malformed file: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("{0}")]
    Invalid(String),

    #[error("NaN loss at iteration {iter} in term {term}")]
    NanLoss { iter: usize, term: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SuhmoError>;
