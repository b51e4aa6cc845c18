use std::path::PathBuf;

use crate::engine::StatementId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid game spec: {field}: {message}")]
    Validation { field: String, message: String },

    #[error("unknown statement {0}")]
    UnknownStatement(StatementId),

    #[error("input event out of canvas bounds: ({x}, {y})")]
    OutOfBounds { x: f64, y: f64 },

    #[error("game is over; reset before stepping")]
    Terminal,

    #[error("feature vector has {got} values, genome expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("enabled connections form a cycle")]
    Cycle,

    #[error("action {0} is not available in this game")]
    UnknownAction(String),

    #[error("training requires at least one snapshot")]
    EmptySnapshots,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("recording session already active")]
    SessionActive,

    #[error("no recording session active")]
    NoSession,

    #[error("sample must not be empty")]
    EmptySample,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
