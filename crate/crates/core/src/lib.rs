//! Acoustic spirometry and respiration-rate estimation from mask microphone
//! audio.
//!
//! The forced pipeline turns a forced exhalation into flow curves, a feature
//! vector and regression estimates of PEF, FEV1 and FVC. The tidal pipeline
//! classifies windows of restful breathing audio and estimates the
//! respiration rate from envelope peaks.

pub mod error;
pub mod features;
pub mod flow;
pub mod forced;
pub mod io;
pub mod learn;
pub mod seed;
pub mod signal;
pub mod tidal;

pub use error::{Error, Result};
