use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game: {}", .0.join("; "))]
    InvalidGame(Vec<String>),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kernel {0} is not separable across actions")]
    NonSeparableKernel(&'static str),

    #[error("regularizer is not convex: {0}")]
    NonConvex(String),

    #[error("instance is not efficiently player-decomposable: {0}")]
    NotDecomposable(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{what} = {size} exceeds the limit {limit}")]
    TooLarge { what: &'static str, size: usize, limit: usize },

    #[error("unknown schema {found:?}, expected {expected:?}")]
    Schema { found: String, expected: &'static str },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn dim(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
