use thiserror::Error;

/// Errors raised by the numerical and pipeline layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular modulus at node {index}: log|x| undefined")]
    SingularModulus { index: usize },

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error("singular matrix in linear solve")]
    SingularMatrix,

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("unsupported task: {0}")]
    UnsupportedTask(String),

    #[error("degenerate margin: {0}")]
    DegenerateMargin(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(msg: impl Into<String>) -> Error {
    Error::InvalidDimension(msg.into())
}
