use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("covariance is ill-conditioned (condition number {condition:e}); use the regularized Hotelling observer")]
    IllConditioned { condition: f64 },

    #[error("every singular value was truncated at threshold {lambda:e}")]
    AllTruncated { lambda: f64 },

    #[error("class {0} has no scores")]
    EmptyClass(u8),

    #[error("non-finite gradient in parameter tensor {tensor}")]
    NonFiniteGradient { tensor: usize },

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("backward pass requires a forward cache produced by the same network")]
    MissingCache,

    #[error("the cluster library is empty")]
    EmptyLibrary,

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn shape(expected: impl std::fmt::Display, found: impl std::fmt::Display) -> Error {
    Error::ShapeMismatch {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
