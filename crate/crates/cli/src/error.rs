use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] gazeperc_core::CoreError),
    #[error(transparent)]
    Nn(#[from] gazeperc_nn::NnError),
    #[error(transparent)]
    Pipeline(#[from] gazeperc_pipeline::PipelineError),
    #[error(transparent)]
    Stats(#[from] gazeperc_stats::StatsError),
    #[error(transparent)]
    Synth(#[from] gazeperc_synth::SynthError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        use gazeperc_core::CoreError as C;
        use gazeperc_pipeline::PipelineError as P;
        let io = match self {
            CliError::Io { .. } => true,
            CliError::Core(C::Io(_)) | CliError::Synth(gazeperc_synth::SynthError::Io(_)) => true,
            CliError::Pipeline(P::Io(_) | P::Core(C::Io(_))) => true,
            CliError::Nn(e) => matches!(e, gazeperc_nn::NnError::Io(_)),
            _ => false,
        };
        if io {
            2
        } else {
            1
        }
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Validation(msg.into()))
}
