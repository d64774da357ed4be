use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("convexity lost at node {node} (min eigenvalue of b = {min_eig:e})")]
    ConvexityLost { node: usize, min_eig: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("iteration limit reached after {0} iterations")]
    IterationLimit(usize),

    #[error("invalid complex: {0}")]
    InvalidComplex(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
