//! Tidal-breathing pipeline: classify windows of mask audio as tidal
//! breathing, speech or noise, vote per recording, and estimate the
//! respiration rate from the breathing envelope.

mod cnn;
mod corpus;
mod rate;
mod study;
mod vote;
mod windows;

pub use cnn::{train_cnn, CnnConfig, CnnModel, TrainingSet, CNN_VERSION};
pub use corpus::{synthetic_corpus, CorpusConfig, LabeledRecording};
pub use rate::{
    breathing_envelope, cycles_in, metronome_check, metronome_from_gap, rate_from_gap, respiration_rate,
    respiration_rate_filtered, respiration_rate_with, MetronomeReport, RateConfig, RespirationResult,
};
pub use study::{
    cross_validate, featurize, sampling_rate_study, stratified_folds, tune_windows, window_grid, CvOptions, CvResult,
    FoldAccuracy, StudyRow, TuneRow, CV_FOLDS, STUDY_RATES_HZ,
};
pub use vote::{vote, TidalClass, TidalDecision, VotedLabel, VOTE_DENOMINATOR, VOTE_NUMERATOR};
pub use windows::{slice_windows, window_count, TidalWindowBatch, WindowConfig};

use crate::error::{Error, Result};
use crate::signal::{bandpass_tidal, highpass_tidal, AudioRecording};

/// Restrict to the 50-500 Hz breathing band. At 1 kHz and below the
/// Nyquist frequency already caps the band, so only the high-pass runs.
pub fn preprocess(rec: &AudioRecording) -> Result<AudioRecording> {
    if rec.sample_rate_hz() > 1000 {
        bandpass_tidal(rec)
    } else {
        highpass_tidal(rec)
    }
}

/// Per-window labels and the 90 % vote for one recording.
pub fn classify(model: &CnnModel, rec: &AudioRecording) -> Result<TidalDecision> {
    if rec.sample_rate_hz() != model.sample_rate_hz {
        return Err(Error::invalid(format!(
            "model trained at {} Hz, recording is {} Hz",
            model.sample_rate_hz,
            rec.sample_rate_hz()
        )));
    }
    let batch = slice_windows(&preprocess(rec)?, &model.window)?;
    let labels = batch
        .windows
        .iter()
        .map(|m| model.predict(m))
        .collect::<Result<Vec<_>>>()?;
    let (voted_label, vote_fraction) = vote(&labels);
    Ok(TidalDecision {
        source: rec.source_id().to_string(),
        per_window_label: labels,
        voted_label,
        vote_fraction,
    })
}

/// Train on a whole labeled corpus with one window setting.
pub fn train_on_corpus(
    corpus: &[LabeledRecording],
    window: &WindowConfig,
    cfg: &CnnConfig,
    seed: u64,
) -> Result<CnnModel> {
    let Some(first) = corpus.first() else {
        return Err(Error::InvalidDataset("empty corpus".into()));
    };
    let rate = first.recording.sample_rate_hz();
    if corpus.iter().any(|r| r.recording.sample_rate_hz() != rate) {
        return Err(Error::InvalidDataset("corpus mixes sample rates".into()));
    }
    let batches = featurize(corpus, window)?;
    let mut maps = Vec::new();
    let mut labels = Vec::new();
    for (b, r) in batches.iter().zip(corpus) {
        maps.extend(b.windows.iter().cloned());
        labels.extend(std::iter::repeat_n(r.label, b.len()));
    }
    let set = TrainingSet {
        maps,
        labels,
        bands: batches[0].bands,
        frames: batches[0].frames,
    };
    train_cnn(&set, window, rate, cfg, seed)
}
