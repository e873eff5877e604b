//! Cross-validated classifier accuracy, window hyperparameter search and
//! the sampling-rate study.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cnn::{train_cnn, CnnConfig, TrainingSet};
use super::corpus::LabeledRecording;
use super::preprocess;
use super::rate::{respiration_rate_filtered, RateConfig};
use super::vote::{vote, TidalClass, VotedLabel};
use super::windows::{slice_windows, TidalWindowBatch, WindowConfig};
use crate::error::{Error, Result};
use crate::seed;
use crate::signal::{decimate, AudioRecording};

pub const CV_FOLDS: usize = 6;
pub const STUDY_RATES_HZ: [u32; 5] = [16000, 8000, 4000, 2000, 1000];

/// Fold of each recording: the `k`-th recording of a class goes to fold
/// `k mod folds`.
pub fn stratified_folds(labels: &[TidalClass], folds: usize) -> Vec<usize> {
    let mut seen = [0usize; 3];
    labels
        .iter()
        .map(|l| {
            let f = seen[l.index()] % folds;
            seen[l.index()] += 1;
            f
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAccuracy {
    pub fold: usize,
    pub windows: usize,
    pub windows_correct: usize,
    pub recordings: usize,
    pub recordings_correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub window_accuracy: f64,
    /// Recordings whose 90 % vote equals the true class.
    pub recording_accuracy: f64,
    pub folds: Vec<FoldAccuracy>,
}

/// Options for [`cross_validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    /// Permute training window labels (chance-level control).
    pub shuffle_labels: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            folds: CV_FOLDS,
            seed: 0,
            shuffle_labels: false,
        }
    }
}

fn training_set(batches: &[&TidalWindowBatch], labels: &[TidalClass]) -> TrainingSet {
    let mut maps = Vec::new();
    let mut out = Vec::new();
    for (b, &l) in batches.iter().zip(labels) {
        maps.extend(b.windows.iter().cloned());
        out.extend(std::iter::repeat_n(l, b.len()));
    }
    TrainingSet {
        maps,
        labels: out,
        bands: batches[0].bands,
        frames: batches[0].frames,
    }
}

/// Recording-grouped, class-stratified cross-validation; folds run in
/// parallel, each training run is sequential and seeded by its fold index.
pub fn cross_validate(
    batches: &[TidalWindowBatch],
    labels: &[TidalClass],
    window: &WindowConfig,
    cfg: &CnnConfig,
    opts: &CvOptions,
) -> Result<CvResult> {
    if batches.len() != labels.len() || batches.is_empty() {
        return Err(Error::invalid("one label per recording required"));
    }
    if opts.folds < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    let rate = batches[0].sample_rate_hz;
    let fold_of = stratified_folds(labels, opts.folds);
    let folds = (0..opts.folds)
        .into_par_iter()
        .map(|f| -> Result<FoldAccuracy> {
            let train_idx: Vec<usize> = (0..batches.len()).filter(|&i| fold_of[i] != f).collect();
            let test_idx: Vec<usize> = (0..batches.len()).filter(|&i| fold_of[i] == f).collect();
            let train_b: Vec<&TidalWindowBatch> = train_idx.iter().map(|&i| &batches[i]).collect();
            let train_l: Vec<TidalClass> = train_idx.iter().map(|&i| labels[i]).collect();
            let mut set = training_set(&train_b, &train_l);
            if opts.shuffle_labels {
                set.labels.shuffle(&mut seed::rng(opts.seed, 500 + f as u64));
            }
            let model = train_cnn(&set, window, rate, cfg, seed::derive_seed(opts.seed, f as u64))?;
            let mut acc = FoldAccuracy {
                fold: f,
                windows: 0,
                windows_correct: 0,
                recordings: test_idx.len(),
                recordings_correct: 0,
            };
            for &i in &test_idx {
                let preds = batches[i]
                    .windows
                    .iter()
                    .map(|m| model.predict(m))
                    .collect::<Result<Vec<_>>>()?;
                acc.windows += preds.len();
                acc.windows_correct += preds.iter().filter(|&&p| p == labels[i]).count();
                if vote(&preds).0 == VotedLabel::from(labels[i]) {
                    acc.recordings_correct += 1;
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let windows: usize = folds.iter().map(|f| f.windows).sum();
    let correct: usize = folds.iter().map(|f| f.windows_correct).sum();
    let recs: usize = folds.iter().map(|f| f.recordings).sum();
    let recs_ok: usize = folds.iter().map(|f| f.recordings_correct).sum();
    Ok(CvResult {
        window_accuracy: correct as f64 / windows as f64,
        recording_accuracy: recs_ok as f64 / recs as f64,
        folds,
    })
}

/// Band-limit every recording and slice it.
pub fn featurize(corpus: &[LabeledRecording], window: &WindowConfig) -> Result<Vec<TidalWindowBatch>> {
    corpus
        .par_iter()
        .map(|r| slice_windows(&preprocess(&r.recording)?, window))
        .collect()
}

/// Window search space: {0.5, 1, 2} s x {25, 50, 100} % offset x {256, 512}.
pub fn window_grid() -> Vec<WindowConfig> {
    let mut grid = Vec::new();
    for window_s in [0.5, 1.0, 2.0] {
        for frac in [0.25, 0.5, 1.0] {
            for fft_length in [256, 512] {
                grid.push(WindowConfig {
                    window_s,
                    offset_s: window_s * frac,
                    fft_length,
                    ..Default::default()
                });
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub window: WindowConfig,
    pub window_accuracy: f64,
}

/// Cross-validated accuracy of every window setting; the best (first on
/// ties) is returned alongside the table.
pub fn tune_windows(
    corpus: &[LabeledRecording],
    grid: &[WindowConfig],
    cfg: &CnnConfig,
    opts: &CvOptions,
) -> Result<(WindowConfig, Vec<TuneRow>)> {
    let labels: Vec<TidalClass> = corpus.iter().map(|r| r.label).collect();
    let mut rows = Vec::new();
    for w in grid {
        let batches = featurize(corpus, w)?;
        let cv = cross_validate(&batches, &labels, w, cfg, opts)?;
        rows.push(TuneRow {
            window: w.clone(),
            window_accuracy: cv.window_accuracy,
        });
    }
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.window_accuracy > rows[best].window_accuracy {
            best = i;
        }
    }
    let chosen = rows
        .get(best)
        .map(|r| r.window.clone())
        .ok_or_else(|| Error::invalid("empty window grid"))?;
    Ok((chosen, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub rate_hz: u32,
    pub window_accuracy: f64,
    pub recording_accuracy: f64,
    /// Mean absolute respiration-rate error over accepted tidal recordings.
    pub rate_mae_bpm: f64,
    pub rate_rejected: usize,
}

/// Band-limit at the source rate, decimate to each rate, then retrain and
/// evaluate the classifier and re-estimate tidal rates.
pub fn sampling_rate_study(
    corpus: &[LabeledRecording],
    rates: &[u32],
    window: &WindowConfig,
    cfg: &CnnConfig,
    opts: &CvOptions,
) -> Result<Vec<StudyRow>> {
    let filtered: Vec<AudioRecording> = corpus
        .par_iter()
        .map(|r| preprocess(&r.recording))
        .collect::<Result<_>>()?;
    let labels: Vec<TidalClass> = corpus.iter().map(|r| r.label).collect();
    let mut rows = Vec::new();
    for &rate in rates {
        let down: Vec<AudioRecording> = filtered.par_iter().map(|r| decimate(r, rate)).collect::<Result<_>>()?;
        let batches = down
            .iter()
            .map(|r| slice_windows(r, window))
            .collect::<Result<Vec<_>>>()?;
        let cv = cross_validate(&batches, &labels, window, cfg, opts)?;
        let mut errors = Vec::new();
        let mut rejected = 0;
        for (r, item) in down.iter().zip(corpus) {
            let Some(truth) = item.bpm else { continue };
            let res = respiration_rate_filtered(r.samples(), rate, r.source_id(), &RateConfig::default())?;
            match res.rate_bpm {
                Some(bpm) => errors.push((bpm - truth).abs()),
                None => rejected += 1,
            }
        }
        rows.push(StudyRow {
            rate_hz: rate,
            window_accuracy: cv.window_accuracy,
            recording_accuracy: cv.recording_accuracy,
            rate_mae_bpm: if errors.is_empty() {
                f64::NAN
            } else {
                errors.iter().sum::<f64>() / errors.len() as f64
            },
            rate_rejected: rejected,
        });
    }
    Ok(rows)
}
