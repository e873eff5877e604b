//! Mel filterbank energies, mel spectrogram bands and cepstral coefficients.
//!
//! Mel scale is HTK: `mel = 2595 log10(1 + f / 700)`. Filters are triangles
//! on `bands + 2` points equally spaced in mel between `fmin` and `fmax`,
//! evaluated at the FFT bin frequencies. Energies are taken from the
//! one-sided power spectrum, so doubling the amplitude quadruples them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::frames::{power_spectrum, Frames};
use crate::error::{Error, Result};

/// Floor added before taking logarithms of energies.
pub const LOG_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub mfe_bands: usize,
    pub melspec_bands: usize,
    /// Cepstral coefficients computed per frame.
    pub mfcc_coeffs: usize,
    /// Leading coefficients kept for the normalized variant.
    pub mfcc_mvn_coeffs: usize,
    pub fmin_hz: f64,
    /// `None` means the Nyquist frequency.
    pub fmax_hz: Option<f64>,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            mfe_bands: 40,
            melspec_bands: 64,
            mfcc_coeffs: 13,
            mfcc_mvn_coeffs: 10,
            fmin_hz: 0.0,
            fmax_hz: None,
        }
    }
}

impl MelConfig {
    pub fn range(&self, sample_rate_hz: u32) -> Result<(f64, f64)> {
        let nyquist = sample_rate_hz as f64 / 2.0;
        let fmax = self.fmax_hz.unwrap_or(nyquist);
        if !(self.fmin_hz >= 0.0 && self.fmin_hz < fmax && fmax <= nyquist) {
            return Err(Error::invalid(format!(
                "mel range [{}, {fmax}] Hz invalid for Nyquist {nyquist} Hz",
                self.fmin_hz
            )));
        }
        if self.mfe_bands == 0 || self.melspec_bands == 0 {
            return Err(Error::invalid("mel band counts must be positive"));
        }
        if self.mfcc_coeffs > self.mfe_bands || self.mfcc_mvn_coeffs > self.mfcc_coeffs {
            return Err(Error::invalid("need mfcc_mvn_coeffs <= mfcc_coeffs <= mfe_bands"));
        }
        Ok((self.fmin_hz, fmax))
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// `bands x (fft_length / 2 + 1)` triangular weights.
pub fn mel_filterbank(bands: usize, fft_length: usize, sample_rate_hz: u32, fmin: f64, fmax: f64) -> Vec<Vec<f64>> {
    let (lo, hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let edges: Vec<f64> = (0..bands + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (bands + 1) as f64))
        .collect();
    let bins = fft_length / 2 + 1;
    let bin_hz = sample_rate_hz as f64 / fft_length as f64;
    (0..bands)
        .map(|b| {
            let (l, c, r) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= l || f >= r {
                        0.0
                    } else if f <= c {
                        (f - l) / (c - l)
                    } else {
                        (r - f) / (r - c)
                    }
                })
                .collect()
        })
        .collect()
}

pub(crate) fn apply_filterbank(spectra: &[Vec<f64>], fb: &[Vec<f64>]) -> Vec<Vec<f64>> {
    spectra
        .iter()
        .map(|s| fb.iter().map(|w| w.iter().zip(s).map(|(a, b)| a * b).sum()).collect())
        .collect()
}

pub(crate) fn mel_energies(
    spectra: &[Vec<f64>],
    bands: usize,
    frames: &Frames,
    cfg: &MelConfig,
) -> Result<Vec<Vec<f64>>> {
    let (fmin, fmax) = cfg.range(frames.sample_rate_hz)?;
    let fb = mel_filterbank(bands, frames.fft_length, frames.sample_rate_hz, fmin, fmax);
    Ok(apply_filterbank(spectra, &fb))
}

/// Per-frame mel filterbank energies, `cfg.mfe_bands` per frame.
pub fn mfe(frames: &Frames, cfg: &MelConfig) -> Result<Vec<Vec<f64>>> {
    mel_energies(&power_spectrum(frames), cfg.mfe_bands, frames, cfg)
}

/// `ln(e + LOG_EPSILON)` of each energy.
pub fn log_mfe(energies: &[Vec<f64>]) -> Vec<Vec<f64>> {
    energies
        .iter()
        .map(|r| r.iter().map(|e| (e + LOG_EPSILON).ln()).collect())
        .collect()
}

/// Per-frame mel spectrogram bands, `cfg.melspec_bands` per frame.
pub fn melspectrogram(frames: &Frames, cfg: &MelConfig) -> Result<Vec<Vec<f64>>> {
    mel_energies(&power_spectrum(frames), cfg.melspec_bands, frames, cfg)
}

/// Orthonormal DCT-II, first `k` coefficients.
pub(crate) fn dct2(x: &[f64], k: usize) -> Vec<f64> {
    let n = x.len() as f64;
    (0..k)
        .map(|q| {
            let scale = if q == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale
                * x.iter()
                    .enumerate()
                    .map(|(i, v)| v * (PI * q as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos())
                    .sum::<f64>()
        })
        .collect()
}

pub(crate) fn cepstra(log_energies: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    log_energies.iter().map(|r| dct2(r, k)).collect()
}

/// `cfg.mfcc_coeffs` cepstral coefficients per frame from the log MFE.
pub fn mfcc(frames: &Frames, cfg: &MelConfig) -> Result<Vec<Vec<f64>>> {
    Ok(cepstra(&log_mfe(&mfe(frames, cfg)?), cfg.mfcc_coeffs))
}

/// Standardize each column to mean 0 and variance 1 (population variance).
/// Constant columns become zeros.
pub fn mvn_columns(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if rows.len() < 2 {
        return Err(Error::DegenerateNormalization(format!(
            "variance across {} frame(s) is undefined",
            rows.len()
        )));
    }
    let cols = rows[0].len();
    let n = rows.len() as f64;
    let mut out = rows.to_vec();
    for c in 0..cols {
        let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        // Relative floor: rounding noise in a constant column is not variance.
        let constant = sd <= 1e-12 * mean.abs().max(1.0);
        for r in out.iter_mut() {
            r[c] = if constant { 0.0 } else { (r[c] - mean) / sd };
        }
    }
    Ok(out)
}

/// Leading `cfg.mfcc_mvn_coeffs` coefficients, mean-variance normalized
/// across frames.
pub fn mfcc_mvn(frames: &Frames, cfg: &MelConfig) -> Result<Vec<Vec<f64>>> {
    let c = mfcc(frames, cfg)?;
    let kept: Vec<Vec<f64>> = c.iter().map(|r| r[..cfg.mfcc_mvn_coeffs].to_vec()).collect();
    mvn_columns(&kept)
}
