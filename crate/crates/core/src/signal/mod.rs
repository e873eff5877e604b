//! Deterministic DSP primitives shared by the forced and tidal pipelines.
//!
//! Everything here is a pure function of its inputs. Recordings are mono;
//! samples are `f64` and carry no unit until [`normalize`] maps them onto
//! `[-1, 1]`.

pub mod fft;
mod fir;
mod hilbert;
mod iir;
pub(crate) mod peaks;
pub mod synth;

pub use fir::{
    decimate, design_kaiser_fir, design_kaiser_fir_with_cutoff, filtfilt_fir, kaiser_beta, kaiser_lowpass,
    kaiser_order, smooth_fir, FirSpec, ENVELOPE_CUTOFF_HZ, FIR_STOPBAND_ATTENUATION_DB,
};
pub use hilbert::{hilbert_envelope, Envelope};
pub use iir::{bandpass_tidal, highpass_tidal, Biquad, TIDAL_BAND_HIGH_HZ, TIDAL_BAND_LOW_HZ};
pub use peaks::{detect_peaks, PeakSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Short-window RMS length used for onset detection.
pub const ONSET_WINDOW_S: f64 = 0.030;
/// Onset threshold as a fraction of the maximum short-window RMS.
pub const ONSET_THRESHOLD: f64 = 0.1;
/// Pre-roll kept ahead of the detected onset when clipping a maneuver.
pub const PRE_ROLL_S: f64 = 1.0;

/// A mono PCM recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioRecording {
    samples: Vec<f64>,
    sample_rate_hz: u32,
    source_id: String,
}

impl AudioRecording {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32, source_id: impl Into<String>) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::invalid("recording is empty"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            source_id: source_id.into(),
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn channel_count(&self) -> u16 {
        1
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Same rate and source, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, self.sample_rate_hz, self.source_id.clone())
    }

    /// Samples `[start, end)` as a new recording.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.samples.len() {
            return Err(Error::invalid(format!(
                "slice [{start}, {end}) outside recording of {} samples",
                self.samples.len()
            )));
        }
        self.with_samples(self.samples[start..end].to_vec())
    }
}

/// Scale by the maximum absolute sample so the peak magnitude becomes 1.
/// An all-zero recording is returned unchanged.
pub fn normalize(rec: &AudioRecording) -> AudioRecording {
    let peak = rec.samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    if peak == 0.0 {
        return rec.clone();
    }
    let samples = rec.samples.iter().map(|s| (s / peak).clamp(-1.0, 1.0)).collect();
    AudioRecording {
        samples,
        sample_rate_hz: rec.sample_rate_hz,
        source_id: rec.source_id.clone(),
    }
}

/// RMS over consecutive non-overlapping windows; the last window may be short.
pub fn windowed_rms(x: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    x.chunks(window)
        .map(|c| (c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64).sqrt())
        .collect()
}

/// Index of the first sample of the first 30 ms window whose RMS exceeds
/// `threshold_fraction` of the loudest window.
pub fn detect_exhalation_start(rec: &AudioRecording, threshold_fraction: f64) -> Result<usize> {
    if !(threshold_fraction > 0.0 && threshold_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "threshold fraction {threshold_fraction} outside (0, 1)"
        )));
    }
    let window = ((ONSET_WINDOW_S * rec.sample_rate_hz as f64).round() as usize).max(1);
    let rms = windowed_rms(&rec.samples, window);
    let max_rms = rms.iter().cloned().fold(0.0, f64::max);
    if max_rms == 0.0 {
        return Err(Error::OnsetNotFound);
    }
    let threshold = threshold_fraction * max_rms;
    rms.iter()
        .position(|&r| r > threshold)
        .map(|w| w * window)
        .ok_or(Error::OnsetNotFound)
}

/// Keep one second ahead of `onset` through the end of the recording.
pub fn clip_forced(rec: &AudioRecording, onset: usize) -> Result<AudioRecording> {
    if onset >= rec.len() {
        return Err(Error::invalid(format!(
            "onset {onset} beyond recording of {} samples",
            rec.len()
        )));
    }
    let pre_roll = (PRE_ROLL_S * rec.sample_rate_hz as f64).round() as usize;
    let start = onset.saturating_sub(pre_roll);
    rec.slice(start, rec.len())
}

/// Centered moving mean. Near the edges the window shrinks to the samples
/// that exist, so the output never ramps in from zero.
///
/// For even windows the extra sample is taken on the right.
pub fn moving_average(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::invalid("moving-average window must be positive"));
    }
    if window > x.len() {
        return Err(Error::invalid(format!(
            "moving-average window {window} longer than sequence of {}",
            x.len()
        )));
    }
    let left = (window - 1) / 2;
    let right = window / 2;
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    Ok((0..x.len())
        .map(|k| {
            let lo = k.saturating_sub(left);
            let hi = (k + right).min(x.len() - 1);
            (prefix[hi + 1] - prefix[lo]) / (hi + 1 - lo) as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(samples: Vec<f64>, rate: u32) -> AudioRecording {
        AudioRecording::new(samples, rate, "t").unwrap()
    }

    #[test]
    fn normalize_scales_by_peak() {
        let out = normalize(&rec(vec![0.0, 0.5, -2.0], 8));
        assert_eq!(out.samples(), &[0.0, 0.25, -1.0]);
    }

    #[test]
    fn normalize_leaves_silence_alone() {
        let out = normalize(&rec(vec![0.0; 16], 8));
        assert!(out.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn empty_recording_rejected() {
        assert!(matches!(
            AudioRecording::new(vec![], 16000, "x"),
            Err(Error::InvalidInput(_))
        ));
        assert!(AudioRecording::new(vec![0.0], 0, "x").is_err());
    }

    proptest! {
        #[test]
        fn normalize_idempotent_and_scale_invariant(
            xs in proptest::collection::vec(-100.0f64..100.0, 1..64),
            c in 0.01f64..1000.0,
        ) {
            let r = rec(xs.clone(), 100);
            let once = normalize(&r);
            let twice = normalize(&once);
            for (a, b) in once.samples().iter().zip(twice.samples()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let scaled = normalize(&rec(xs.iter().map(|v| v * c).collect(), 100));
            for (a, b) in once.samples().iter().zip(scaled.samples()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!(once.samples().iter().all(|s| (-1.0..=1.0).contains(s)));
        }
    }

    #[test]
    fn onset_of_step() {
        let rate = 16000;
        let mut x = vec![0.0; 2 * rate as usize];
        x.extend(std::iter::repeat_n(1.0, rate as usize));
        let onset = detect_exhalation_start(&rec(x, rate), 0.1).unwrap();
        let window = (0.03 * rate as f64) as usize;
        assert!((onset as i64 - 2 * rate as i64).unsigned_abs() as usize <= window);
    }

    #[test]
    fn onset_of_constant_signal_is_zero() {
        let x = vec![0.3; 4000];
        assert_eq!(detect_exhalation_start(&rec(x, 8000), 0.1).unwrap(), 0);
    }

    #[test]
    fn onset_missing_in_silence() {
        let r = rec(vec![0.0; 1000], 8000);
        assert!(matches!(detect_exhalation_start(&r, 0.1), Err(Error::OnsetNotFound)));
    }

    #[test]
    fn clip_keeps_one_second_pre_roll() {
        let rate = 1000u32;
        let r = rec(vec![0.1; 8000], rate);
        let c = clip_forced(&r, 2000).unwrap();
        assert_eq!(c.len(), 7000);
        let c = clip_forced(&r, 500).unwrap();
        assert_eq!(c.len(), 8000);
        let c = clip_forced(&r, 7999).unwrap();
        assert_eq!(c.len(), 1001);
        assert!(clip_forced(&r, 8000).is_err());
    }

    #[test]
    fn moving_average_examples() {
        assert_eq!(moving_average(&[2.0; 5], 3).unwrap(), vec![2.0; 5]);
        assert_eq!(
            moving_average(&[0.0, 0.0, 3.0, 0.0, 0.0], 3).unwrap(),
            vec![0.0, 1.0, 1.0, 1.0, 0.0]
        );
        let alt: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let out = moving_average(&alt, 2).unwrap();
        assert!(out[..9].iter().all(|&v| v == 0.0));
        assert!(moving_average(&[1.0, 2.0], 3).is_err());
    }
}
