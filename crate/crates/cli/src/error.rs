//! CLI-level errors: core failures plus file, parse, and config problems
//! with enough context (path, line) to act on.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Error, Debug)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] seld_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Wav { path: PathBuf, reason: String },

    #[error("{path}:{line}: {reason}")]
    Csv {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: {reason}")]
    Blob { path: PathBuf, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error("unknown config key `{key}`{}", match suggestion { Some(s) => format!("; did you mean `{s}`?"), None => String::new() })]
    UnknownKey {
        key: String,
        suggestion: Option<String>,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("{failed} of {total} clips failed; see {manifest}")]
    PartialBatch {
        failed: usize,
        total: usize,
        manifest: PathBuf,
    },

    #[error("self-check failed: {0}")]
    SelfCheck(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn wav(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        CliError::Wav {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn csv(path: impl Into<PathBuf>, line: usize, reason: impl Into<String>) -> Self {
        CliError::Csv {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }

    pub fn blob(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        CliError::Blob {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
