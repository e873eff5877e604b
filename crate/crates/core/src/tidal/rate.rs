use serde::{Deserialize, Serialize};

use super::preprocess;
use crate::error::{Error, Result};
use crate::signal::{
    detect_peaks, filtfilt_fir, hilbert_envelope, kaiser_beta, kaiser_lowpass, kaiser_order, Envelope, PeakSet,
};

/// Envelope smoothing and peak picking for respiration rate.
///
/// The Hilbert envelope is block-averaged down to `envelope_rate_hz`, then
/// low-passed with a Kaiser FIR (forward-backward). Peaks must be
/// `min_separation_s` apart with prominence of at least
/// `prominence_fraction` of the smoothed envelope maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    pub envelope_rate_hz: u32,
    pub cutoff_hz: f64,
    pub transition_hz: f64,
    pub attenuation_db: f64,
    pub min_separation_s: f64,
    pub prominence_fraction: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            envelope_rate_hz: 50,
            cutoff_hz: 1.0,
            transition_hz: 1.0,
            attenuation_db: 40.0,
            min_separation_s: 1.5,
            prominence_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RespirationResult {
    pub source: String,
    /// Breaths per minute, `60 / mean peak gap`; absent when rejected.
    pub rate_bpm: Option<f64>,
    pub peak_set: Option<PeakSet>,
    pub rejected: bool,
    pub duration_s: f64,
}

impl RespirationResult {
    pub fn rejected(source: &str, duration_s: f64) -> Self {
        Self {
            source: source.to_string(),
            rate_bpm: None,
            peak_set: None,
            rejected: true,
            duration_s,
        }
    }

    /// Whole breathing cycles in the recording at the measured mean gap.
    pub fn cycles(&self) -> Option<f64> {
        self.peak_set
            .as_ref()
            .map(|p| cycles_in(self.duration_s, p.mean_peak_to_peak_s))
    }
}

pub fn rate_from_gap(mean_gap_s: f64) -> f64 {
    60.0 / mean_gap_s
}

pub fn cycles_in(duration_s: f64, mean_gap_s: f64) -> f64 {
    duration_s / mean_gap_s
}

/// Smoothed, decimated envelope used for peak picking.
pub fn breathing_envelope(samples: &[f64], sample_rate_hz: u32, cfg: &RateConfig) -> Result<Envelope> {
    if cfg.envelope_rate_hz == 0 || sample_rate_hz % cfg.envelope_rate_hz != 0 {
        return Err(Error::invalid(format!(
            "envelope rate {} Hz must divide {sample_rate_hz} Hz",
            cfg.envelope_rate_hz
        )));
    }
    let rec = crate::signal::AudioRecording::new(samples.to_vec(), sample_rate_hz, "")?;
    let env = hilbert_envelope(&rec)?;
    let block = (sample_rate_hz / cfg.envelope_rate_hz) as usize;
    let coarse: Vec<f64> = env
        .values()
        .chunks(block)
        .filter(|c| c.len() == block)
        .map(|c| c.iter().sum::<f64>() / block as f64)
        .collect();
    let r = cfg.envelope_rate_hz as f64;
    let order = kaiser_order(cfg.transition_hz / r, cfg.attenuation_db);
    let taps = kaiser_lowpass(cfg.cutoff_hz / r, order, kaiser_beta(cfg.attenuation_db));
    if coarse.len() <= taps.len() {
        return Err(Error::SignalTooShort {
            needed: taps.len() * block,
            got: samples.len(),
        });
    }
    let smooth = filtfilt_fir(&coarse, &taps)?;
    Envelope::new(smooth.into_iter().map(|v| v.max(0.0)).collect(), cfg.envelope_rate_hz)
}

/// Rate of an already band-limited tidal recording.
pub fn respiration_rate_filtered(
    samples: &[f64],
    sample_rate_hz: u32,
    source: &str,
    cfg: &RateConfig,
) -> Result<RespirationResult> {
    let duration_s = samples.len() as f64 / sample_rate_hz as f64;
    let env = breathing_envelope(samples, sample_rate_hz, cfg)?;
    let max = env.max();
    if !(max > 0.0) {
        return Ok(RespirationResult::rejected(source, duration_s));
    }
    match detect_peaks(&env, cfg.min_separation_s, cfg.prominence_fraction * max) {
        Ok(peaks) => Ok(RespirationResult {
            source: source.to_string(),
            rate_bpm: Some(rate_from_gap(peaks.mean_peak_to_peak_s)),
            peak_set: Some(peaks),
            rejected: false,
            duration_s,
        }),
        Err(Error::InsufficientPeaks { .. }) => Ok(RespirationResult::rejected(source, duration_s)),
        Err(e) => Err(e),
    }
}

/// Band-limit, then estimate the rate. Too few envelope peaks gives a
/// rejected result rather than an error.
pub fn respiration_rate(rec: &crate::signal::AudioRecording) -> Result<RespirationResult> {
    respiration_rate_with(rec, &RateConfig::default())
}

pub fn respiration_rate_with(rec: &crate::signal::AudioRecording, cfg: &RateConfig) -> Result<RespirationResult> {
    let filtered = preprocess(rec)?;
    respiration_rate_filtered(filtered.samples(), filtered.sample_rate_hz(), rec.source_id(), cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetronomeReport {
    pub metronome_bpm: f64,
    pub duration_s: f64,
    /// One breathing cycle per two beats.
    pub theoretical_cycles: f64,
    pub measured_cycles: f64,
    pub deviation_cycles: f64,
}

/// Compare measured cycles against a metronome pacing one exhalation and
/// one inhalation per beat pair.
pub fn metronome_check(measured: &RespirationResult, metronome_bpm: f64, duration_s: f64) -> Result<MetronomeReport> {
    let gap = measured
        .peak_set
        .as_ref()
        .map(|p| p.mean_peak_to_peak_s)
        .ok_or_else(|| Error::invalid("respiration result was rejected"))?;
    metronome_from_gap(gap, metronome_bpm, duration_s)
}

pub fn metronome_from_gap(mean_gap_s: f64, metronome_bpm: f64, duration_s: f64) -> Result<MetronomeReport> {
    if !(mean_gap_s > 0.0 && metronome_bpm > 0.0 && duration_s > 0.0) {
        return Err(Error::invalid("metronome inputs must be positive"));
    }
    let theoretical = metronome_bpm / 2.0 / 60.0 * duration_s;
    let measured = cycles_in(duration_s, mean_gap_s);
    Ok(MetronomeReport {
        metronome_bpm,
        duration_s,
        theoretical_cycles: theoretical,
        measured_cycles: measured,
        deviation_cycles: (measured - theoretical).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::synth::{synth, BreathParams, SynthKind};
    use crate::signal::AudioRecording;

    #[test]
    fn fifteen_bpm() {
        let rec = synth(&SynthKind::Breath(BreathParams::default())).unwrap();
        let r = respiration_rate(&rec).unwrap();
        let bpm = r.rate_bpm.unwrap();
        assert!((bpm - 15.0).abs() <= 0.5, "{bpm}");
    }

    #[test]
    fn silence_rejected() {
        let rec = AudioRecording::new(vec![0.0; 16000 * 20], 16000, "zero").unwrap();
        let r = respiration_rate(&rec).unwrap();
        assert!(r.rejected && r.rate_bpm.is_none());
    }

    #[test]
    fn gap_arithmetic() {
        assert_eq!(rate_from_gap(3.2), 18.75);
        assert_eq!(cycles_in(20.0, 3.2), 6.25);
        let m = metronome_from_gap(3.2, 40.0, 20.0).unwrap();
        assert!((m.theoretical_cycles - 20.0 / 3.0).abs() < 1e-12);
        assert!((m.deviation_cycles - (20.0 / 3.0 - 6.25)).abs() < 1e-12);
        let same = metronome_from_gap(3.0, 40.0, 20.0).unwrap();
        assert!(same.deviation_cycles.abs() < 1e-12);
    }
}
