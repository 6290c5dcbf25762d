use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data violating one of the admissibility relations.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// An operation was called outside of its domain of validity.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
