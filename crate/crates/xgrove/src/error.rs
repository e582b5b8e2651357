//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Header/column mismatch, wrong feature kinds, invalid target.
    #[error("schema error: {0}")]
    Schema(String),

    /// A cell that cannot be coerced to its declared type.
    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// Invalid argument to an operation (out-of-range ratio, unknown metric,
    /// arity mismatch, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An explainer was asked to handle a model kind it does not support.
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit code for the CLI: usage-class failures exit 2, internal ones 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) | Error::Parse { .. } | Error::Argument(_) => 2,
            Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 2,
            _ => 1,
        }
    }
}
