use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("row {row}, column `{column}`: {reason}")]
    Data {
        row: usize,
        column: String,
        reason: String,
    },
    #[error("query {index}: {reason}")]
    InvalidQuery { index: usize, reason: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
