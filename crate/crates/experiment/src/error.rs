use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Core(#[from] sriq_core::Error),

    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),

    #[error("dataset format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config could not be serialized: {0}")]
    Emit(#[from] toml::ser::Error),
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

pub(crate) fn file_error(
    path: impl Into<PathBuf>,
) -> impl FnOnce(std::io::Error) -> ExperimentError {
    let path = path.into();
    move |source| ExperimentError::File { path, source }
}
