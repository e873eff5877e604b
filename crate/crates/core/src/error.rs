use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::flow::ShapeRule;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no exhalation onset found above the threshold")]
    OnsetNotFound,

    #[error("signal too short: need more than {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },

    #[error("insufficient peaks: found {found}, need at least 2")]
    InsufficientPeaks { found: usize },

    #[error("normalization is degenerate: {0}")]
    DegenerateNormalization(String),

    #[error("maneuver rejected by shape rules {0:?}")]
    RejectedManeuver(Vec<ShapeRule>),

    #[error("schema mismatch: {0}")]
    SchemaError(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("malformed WAV at byte {offset}: {message}")]
    FormatError { offset: u64, message: String },

    #[error("manifest entry {entry}: {message}")]
    ValidationError { entry: String, message: String },

    #[error("classification is uncertain; refusing to estimate a respiration rate")]
    UncertainInput,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
