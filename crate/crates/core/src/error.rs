use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Input does not follow the expected file layout.
    #[error("format error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Format { line: Option<u64>, msg: String },

    /// Input parses but violates a data invariant.
    #[error("data error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Data { line: Option<u64>, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub fn format(line: Option<u64>, msg: impl Into<String>) -> Self {
        CoreError::Format { line, msg: msg.into() }
    }

    pub fn data(line: Option<u64>, msg: impl Into<String>) -> Self {
        CoreError::Data { line, msg: msg.into() }
    }
}
