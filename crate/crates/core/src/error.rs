use thiserror::Error;

/// Errors surfaced by every layer of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid parameter `{0}`")]
    InvalidParam(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("non-finite loss at step {step}; last good checkpoint at step {last_good_step}")]
    NanLoss { step: usize, last_good_step: usize },
    #[error("dataset item {index}: {source}")]
    Item {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
