//! Kaiser-window FIR design and zero-phase application.
//!
//! The envelope smoother uses a transition width of `2 / n` (normalized to
//! the sample rate `n`, i.e. 2 Hz wide) and a 10 dB stopband specification.
//! The order is the Kaiser estimate
//!
//! ```text
//! order = ceil((A - 7.95) / (14.36 * df))
//! ```
//!
//! rounded up to an even number so the filter is a symmetric type-I FIR.
//! The window shape parameter is Kaiser's
//!
//! ```text
//! beta = 0.1102 (A - 8.7)                          A > 50
//!      = 0.5842 (A - 21)^0.4 + 0.07886 (A - 21)    21 <= A <= 50
//!      = 0                                         A < 21
//! ```

use serde::{Deserialize, Serialize};

use super::{fft, AudioRecording, Envelope};
use crate::error::{Error, Result};

/// Stopband specification for the envelope smoother, dB (magnitude).
pub const FIR_STOPBAND_ATTENUATION_DB: f64 = 10.0;
/// Cutoff of the envelope smoother used by the forced pipeline.
pub const ENVELOPE_CUTOFF_HZ: f64 = 10.0;

/// A designed low-pass FIR: transition, attenuation, minimum order and cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirSpec {
    pub transition_width_normalized: f64,
    pub stopband_attenuation_db: f64,
    pub order: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: u32,
}

impl FirSpec {
    pub fn beta(&self) -> f64 {
        kaiser_beta(self.stopband_attenuation_db)
    }

    /// Tap weights (`order + 1` of them), normalized to unit DC gain.
    pub fn taps(&self) -> Vec<f64> {
        kaiser_lowpass(self.cutoff_hz / self.sample_rate_hz as f64, self.order, self.beta())
    }

    pub fn stopband_edge_hz(&self) -> f64 {
        self.cutoff_hz + 0.5 * self.transition_width_normalized * self.sample_rate_hz as f64
    }
}

/// Minimum even order from Kaiser's estimate; never below 2.
pub fn kaiser_order(transition_width_normalized: f64, attenuation_db: f64) -> usize {
    let raw = ((attenuation_db - 7.95) / (14.36 * transition_width_normalized)).ceil();
    let order = if raw.is_finite() && raw > 1.0 { raw as usize } else { 1 };
    (order + order % 2).max(2)
}

/// Kaiser window shape parameter for a stopband attenuation in dB.
pub fn kaiser_beta(attenuation_db: f64) -> f64 {
    let a = attenuation_db.abs();
    if a > 50.0 {
        0.1102 * (a - 8.7)
    } else if a >= 21.0 {
        0.5842 * (a - 21.0).powf(0.4) + 0.07886 * (a - 21.0)
    } else {
        0.0
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Windowed-sinc low-pass with `order + 1` taps and cutoff `cutoff_normalized`
/// (cycles per sample), scaled to unit DC gain.
pub fn kaiser_lowpass(cutoff_normalized: f64, order: usize, beta: f64) -> Vec<f64> {
    let n = order + 1;
    let mid = order as f64 / 2.0;
    let denom = bessel_i0(beta);
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 - mid;
            let arg = 2.0 * cutoff_normalized * t;
            let sinc = if arg == 0.0 {
                1.0
            } else {
                (std::f64::consts::PI * arg).sin() / (std::f64::consts::PI * arg)
            };
            let r = if mid > 0.0 { t / mid } else { 0.0 };
            let window = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom;
            2.0 * cutoff_normalized * sinc * window
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    if sum != 0.0 {
        taps.iter_mut().for_each(|t| *t /= sum);
    }
    taps
}

/// Envelope-smoother design for `sample_rate_hz` with the default cutoff.
pub fn design_kaiser_fir(sample_rate_hz: u32) -> Result<FirSpec> {
    design_kaiser_fir_with_cutoff(sample_rate_hz, ENVELOPE_CUTOFF_HZ)
}

pub fn design_kaiser_fir_with_cutoff(sample_rate_hz: u32, cutoff_hz: f64) -> Result<FirSpec> {
    if sample_rate_hz == 0 {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let nyquist = sample_rate_hz as f64 / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(Error::invalid(format!(
            "cutoff {cutoff_hz} Hz outside (0, {nyquist}) Hz"
        )));
    }
    let transition = 2.0 / sample_rate_hz as f64;
    Ok(FirSpec {
        transition_width_normalized: transition,
        stopband_attenuation_db: FIR_STOPBAND_ATTENUATION_DB,
        order: kaiser_order(transition, FIR_STOPBAND_ATTENUATION_DB),
        cutoff_hz,
        sample_rate_hz,
    })
}

/// Mirror the signal about its end samples. Odd (point) reflection would
/// turn the instantaneous ripple of a raw envelope at the boundary into an
/// offset over the whole pad.
fn even_extend(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((1..=pad).rev().map(|k| x[k]));
    out.extend_from_slice(x);
    out.extend((1..=pad).map(|k| x[n - 1 - k]));
    out
}

/// Forward-backward (zero-phase) FIR filtering with mirror padding of
/// `order` samples at each end. Output length equals input length.
pub fn filtfilt_fir(x: &[f64], taps: &[f64]) -> Result<Vec<f64>> {
    let order = taps.len().saturating_sub(1);
    if taps.is_empty() || order >= x.len() {
        return Err(Error::SignalTooShort {
            needed: order,
            got: x.len(),
        });
    }
    let pad = order;
    let padded = even_extend(x, pad);
    let len = padded.len();
    let mut y = fft::convolve(&padded, taps);
    y.truncate(len);
    y.reverse();
    let mut y = fft::convolve(&y, taps);
    y.truncate(len);
    y.reverse();
    Ok(y[pad..pad + x.len()].to_vec())
}

/// Zero-phase low-pass of an envelope, clamped at zero.
pub fn smooth_fir(env: &Envelope, spec: &FirSpec) -> Result<Envelope> {
    if env.is_empty() {
        return Err(Error::invalid("envelope is empty"));
    }
    if spec.sample_rate_hz != env.sample_rate_hz() {
        return Err(Error::invalid(format!(
            "filter designed for {} Hz applied to {} Hz envelope",
            spec.sample_rate_hz,
            env.sample_rate_hz()
        )));
    }
    let y = filtfilt_fir(env.values(), &spec.taps())?;
    Envelope::new(y.into_iter().map(|v| v.max(0.0)).collect(), env.sample_rate_hz())
}

/// Anti-alias (Kaiser, 60 dB, cutoff at 0.45 of the target rate) then keep
/// every `source / target`-th sample.
pub fn decimate(rec: &AudioRecording, target_rate_hz: u32) -> Result<AudioRecording> {
    let source = rec.sample_rate_hz();
    if target_rate_hz == 0 || target_rate_hz > source || source % target_rate_hz != 0 {
        return Err(Error::invalid(format!(
            "target rate {target_rate_hz} Hz does not divide source rate {source} Hz"
        )));
    }
    let factor = (source / target_rate_hz) as usize;
    if factor == 1 {
        return Ok(rec.clone());
    }
    let cutoff = 0.45 / factor as f64;
    let transition = 0.1 / factor as f64;
    let attenuation = 60.0;
    let order = kaiser_order(transition, attenuation);
    let taps = kaiser_lowpass(cutoff, order, kaiser_beta(attenuation));
    let filtered = if order < rec.len() {
        filtfilt_fir(rec.samples(), &taps)?
    } else {
        return Err(Error::SignalTooShort {
            needed: order,
            got: rec.len(),
        });
    };
    let kept: Vec<f64> = filtered.into_iter().step_by(factor).collect();
    AudioRecording::new(kept, target_rate_hz, rec.source_id())
}
