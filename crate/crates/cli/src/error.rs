use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("missing input {path}: run `{producer}` first")]
    MissingInput { path: PathBuf, producer: &'static str },
    #[error(transparent)]
    Numeric(#[from] smm_core::Error),
    #[error("{path} was produced by a different configuration (hash {found}, expected {expected}); pass --force to overwrite")]
    HashMismatch { path: PathBuf, found: String, expected: String },
    #[error("{path}: malformed file: {msg}")]
    Format { path: PathBuf, msg: String },
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, msg: impl std::fmt::Display) -> Self {
        CliError::Format { path: path.to_path_buf(), msg: msg.to_string() }
    }

    /// Process exit code for this error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::MissingInput { .. } => 4,
            CliError::Numeric(_) => 5,
            CliError::HashMismatch { .. } => 6,
            CliError::Format { .. } => 7,
        }
    }
}
