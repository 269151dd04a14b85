use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    Shape { op: &'static str, expected: String, actual: String },
    #[error("backward already ran on this graph; run a new forward pass first")]
    GraphConsumed,
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("variable does not belong to this graph")]
    UnknownVar,
    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;

pub(crate) fn shape_err(op: &'static str, expected: impl std::fmt::Debug, actual: impl std::fmt::Debug) -> NnError {
    NnError::Shape { op, expected: format!("{expected:?}"), actual: format!("{actual:?}") }
}
