//! Process exit codes, one per error class.

use std::fmt;

use spiro_core::Error;

pub const SUCCESS: i32 = 0;
/// Anything not covered below.
pub const FAILURE: i32 = 1;
/// Bad command line (reported by the argument parser).
pub const USAGE: i32 = 2;
pub const INVALID_INPUT: i32 = 3;
pub const IO: i32 = 4;
/// Malformed WAV, JSON, CSV or an unexpected schema version.
pub const FORMAT: i32 = 5;
/// Manifest or dataset that fails validation.
pub const VALIDATION: i32 = 6;
/// No onset, or the flow-volume curve fails the shape rules.
pub const REJECTED: i32 = 7;
/// Respiration rate refused: classification uncertain or not tidal.
pub const NOT_TIDAL: i32 = 8;
/// Signal too short, too few peaks or degenerate normalization.
pub const SIGNAL: i32 = 9;

/// The classifier voted for something other than tidal breathing.
#[derive(Debug)]
pub struct NotTidal {
    pub source: String,
    pub label: String,
}

impl fmt::Display for NotTidal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} classified as {}; refusing to estimate a respiration rate (use --force)",
            self.source, self.label
        )
    }
}

impl std::error::Error for NotTidal {}

fn core_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) => INVALID_INPUT,
        Error::Io { .. } => IO,
        Error::FormatError { .. } | Error::SchemaError(_) | Error::Json(_) | Error::Csv(_) => FORMAT,
        Error::ValidationError { .. } | Error::InvalidDataset(_) => VALIDATION,
        Error::OnsetNotFound | Error::RejectedManeuver(_) => REJECTED,
        Error::UncertainInput => NOT_TIDAL,
        Error::SignalTooShort { .. } | Error::InsufficientPeaks { .. } | Error::DegenerateNormalization(_) => SIGNAL,
    }
}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return core_code(e);
        }
        if cause.is::<NotTidal>() {
            return NOT_TIDAL;
        }
        if cause.is::<std::io::Error>() {
            return IO;
        }
        if cause.is::<serde_json::Error>() {
            return FORMAT;
        }
    }
    FAILURE
}
