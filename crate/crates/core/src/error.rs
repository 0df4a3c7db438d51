use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its allowed range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data failed validation (shape mismatch, empty input, bad index).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A CSV file could not be turned into a dataset.
    #[error("ingestion error in {path}: {message}")]
    Ingestion { path: PathBuf, message: String },

    /// A merge would materialize more leaves than the configured budget.
    #[error("merged tree would exceed the leaf budget of {budget} leaves")]
    LeafBudget { budget: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
