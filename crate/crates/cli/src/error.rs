use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Json(#[from] serde_json::Error),

    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },

    #[error("{0}")]
    Core(#[from] walrus_core::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;
