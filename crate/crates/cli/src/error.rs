use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for `{key}`: {reason}")]
    Validation { key: String, reason: String },
    /// A failure inside a numerical stage, tagged with the stage name.
    #[error("{stage}: {source}")]
    Core {
        stage: &'static str,
        source: ibc_core::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn core(stage: &'static str) -> impl Fn(ibc_core::Error) -> CliError {
        move |source| CliError::Core { stage, source }
    }
}
