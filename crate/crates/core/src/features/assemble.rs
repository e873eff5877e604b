//! Per-target feature vectors for a forced maneuver.
//!
//! Each variant looks at a different stretch of the clipped, normalized
//! maneuver (onset = detected exhalation start):
//!
//! * PEF: `[onset, envelope peak]`, extended to at least three frames; frame
//!   features are summed over frames (`cum_` prefix).
//! * FEV1: `[onset, onset + 1 s)`; frame features are averaged (`mean_`).
//! * FVC: the whole clip; frame features are averaged (`mean_`).
//!
//! Frame features per frame: 40 MFE, 40 log MFE, 13 MFCC, 64 mel
//! spectrogram bands and 32 equal-width power-spectrum bands. The first 10
//! MFCCs are also mean-variance normalized across frames and summarized by
//! their per-coefficient maximum (`max_mfcc_mvn_`), since their sum and mean
//! are zero by construction. Every variant then appends the 17 temporal
//! descriptors of the segment waveform (`wave_`) and of the whole flow
//! curve (`fv_`). With default settings that is 233 features per variant.

use serde::{Deserialize, Serialize};

use super::frames::{frame_signal, power_bands, power_spectrum, FrameConfig};
use super::mel::{cepstra, log_mfe, mel_energies, mvn_columns, MelConfig};
use super::temporal::{temporal_features, TEMPORAL_NAMES};
use super::{FeatureVector, TargetVariant};
use crate::error::{Error, Result};
use crate::forced::ManeuverCurves;

pub const SCHEMA_VERSION: &str = "spiro-features/1";

/// Frame and mel settings plus the power-spectrum band count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub frame: FrameConfig,
    pub mel: MelConfig,
    pub power_bands: usize,
}

impl Default for FeatureSchema {
    fn default() -> Self {
        Self {
            frame: FrameConfig::default(),
            mel: MelConfig::default(),
            power_bands: 32,
        }
    }
}

fn frame_prefix(target: TargetVariant) -> &'static str {
    match target {
        TargetVariant::Pef => "cum",
        _ => "mean",
    }
}

fn groups(s: &FeatureSchema) -> [(&'static str, usize); 5] {
    [
        ("mfe", s.mel.mfe_bands),
        ("log_mfe", s.mel.mfe_bands),
        ("mfcc", s.mel.mfcc_coeffs),
        ("melspec", s.mel.melspec_bands),
        ("power", s.power_bands),
    ]
}

impl FeatureSchema {
    /// Ordered feature names for `target`.
    pub fn names(&self, target: TargetVariant) -> Vec<String> {
        let agg = frame_prefix(target);
        let mut names = Vec::new();
        for (group, count) in groups(self) {
            names.extend((0..count).map(|i| format!("{agg}_{group}_{i:02}")));
        }
        names.extend((0..self.mel.mfcc_mvn_coeffs).map(|i| format!("max_mfcc_mvn_{i:02}")));
        for prefix in ["wave", "fv"] {
            names.extend(TEMPORAL_NAMES.iter().map(|n| format!("{prefix}_{n}")));
        }
        names
    }
}

/// Default schema names for `target`.
pub fn schema(target: TargetVariant) -> Vec<String> {
    FeatureSchema::default().names(target)
}

fn segment(curves: &ManeuverCurves, target: TargetVariant, s: &FeatureSchema) -> Result<(usize, usize)> {
    let n = curves.clip.len();
    let rate = curves.clip.sample_rate_hz();
    let onset = curves.onset;
    match target {
        TargetVariant::Pef => {
            let (w, step) = s.frame.samples(rate)?;
            let end = (curves.peak_index() + 1).max(onset + w + 2 * step).min(n);
            Ok((onset, end))
        }
        TargetVariant::Fev1 => {
            let end = onset + rate as usize;
            if end > n {
                return Err(Error::SignalTooShort { needed: end, got: n });
            }
            Ok((onset, end))
        }
        TargetVariant::Fvc | TargetVariant::Generic => Ok((0, n)),
    }
}

/// Feature vector for an accepted maneuver, default schema.
pub fn assemble(curves: &ManeuverCurves, target: TargetVariant) -> Result<FeatureVector> {
    assemble_from_curves(curves, target, &FeatureSchema::default())
}

pub fn assemble_from_curves(
    curves: &ManeuverCurves,
    target: TargetVariant,
    s: &FeatureSchema,
) -> Result<FeatureVector> {
    if !curves.verdict.accepted {
        return Err(Error::RejectedManeuver(curves.verdict.reasons.clone()));
    }
    if target == TargetVariant::Generic {
        return Err(Error::invalid("assemble needs a lung-parameter target"));
    }
    let (start, end) = segment(curves, target, s)?;
    let seg = curves.clip.slice(start, end)?;
    let frames = frame_signal(&seg, &s.frame)?;
    let spectra = power_spectrum(&frames);
    let mfe = mel_energies(&spectra, s.mel.mfe_bands, &frames, &s.mel)?;
    let log = log_mfe(&mfe);
    let mfcc = cepstra(&log, s.mel.mfcc_coeffs);
    let melspec = mel_energies(&spectra, s.mel.melspec_bands, &frames, &s.mel)?;
    let power: Vec<Vec<f64>> = spectra.iter().map(|p| power_bands(p, s.power_bands)).collect();
    let kept: Vec<Vec<f64>> = mfcc.iter().map(|r| r[..s.mel.mfcc_mvn_coeffs].to_vec()).collect();
    let mvn = mvn_columns(&kept)?;

    let count = frames.len() as f64;
    let aggregate = |m: &[Vec<f64>]| -> Vec<f64> {
        let cols = m.first().map_or(0, |r| r.len());
        (0..cols)
            .map(|c| {
                let sum: f64 = m.iter().map(|r| r[c]).sum();
                if target == TargetVariant::Pef {
                    sum
                } else {
                    sum / count
                }
            })
            .collect()
    };
    let mut values = Vec::new();
    for m in [&mfe, &log, &mfcc, &melspec, &power] {
        values.extend(aggregate(m));
    }
    values.extend((0..s.mel.mfcc_mvn_coeffs).map(|c| mvn.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max)));
    let rate = curves.clip.sample_rate_hz() as f64;
    values.extend_from_slice(temporal_features(seg.samples(), rate)?.values());
    values.extend_from_slice(temporal_features(curves.flow.flow(), rate)?.values());
    FeatureVector::new(s.names(target), values, target)
}
