use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum EmtcError {
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error("dataset `{0}` has no samples")]
    EmptyDataset(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    Numeric(String),
    #[error("could not resolve dataset `{name}`; searched: {searched:?}. Download the UEA archive from https://timeseriesclassification.com and pass --data-dir")]
    DatasetNotFound { name: String, searched: Vec<PathBuf> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = EmtcError> = std::result::Result<T, E>;

pub(crate) fn arg_err(msg: impl Into<String>) -> EmtcError {
    EmtcError::Argument(msg.into())
}

pub(crate) fn shape_err(msg: impl Into<String>) -> EmtcError {
    EmtcError::Shape(msg.into())
}
