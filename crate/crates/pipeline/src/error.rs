use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("validation error: {0}")]
    Validation(String),
    /// A trial needs a label map or embedding set that was not supplied.
    #[error("missing scene input for image '{image_id}': {what}")]
    MissingScene { image_id: String, what: &'static str },
    #[error("non-finite loss {loss} at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize, loss: f64 },
    #[error(transparent)]
    Core(#[from] gazeperc_core::CoreError),
    #[error(transparent)]
    Nn(#[from] gazeperc_nn::NnError),
    #[error(transparent)]
    Stats(#[from] gazeperc_stats::StatsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(PipelineError::Validation(msg.into()))
}
