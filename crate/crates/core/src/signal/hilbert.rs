use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{fft, AudioRecording};
use crate::error::{Error, Result};

/// Nonnegative amplitude envelope; used as the flow-rate proxy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    values: Vec<f64>,
    sample_rate_hz: u32,
}

impl Envelope {
    pub fn new(values: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!(
                "envelope value at {i} is negative or non-finite"
            )));
        }
        Ok(Self { values, sample_rate_hz })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }
}

/// Analytic signal of `x` via a single full-length FFT.
pub(crate) fn analytic_signal(x: &[f64]) -> Vec<Complex<f64>> {
    let n = x.len();
    let mut spec = fft::forward(x, n);
    // Keep DC (and Nyquist for even n), double positive frequencies, zero the rest.
    let half = n / 2;
    for (k, c) in spec.iter_mut().enumerate() {
        let gain = if k == 0 || (n % 2 == 0 && k == half) {
            1.0
        } else if k <= (n - 1) / 2 {
            2.0
        } else {
            0.0
        };
        *c *= gain;
    }
    fft::inverse_in_place(&mut spec);
    let scale = 1.0 / n as f64;
    spec.iter().map(|c| c * scale).collect()
}

/// Magnitude of the analytic signal of the recording.
pub fn hilbert_envelope(rec: &AudioRecording) -> Result<Envelope> {
    if rec.len() < 2 {
        return Err(Error::invalid("Hilbert envelope needs at least 2 samples"));
    }
    let values = analytic_signal(rec.samples()).into_iter().map(|c| c.norm()).collect();
    Envelope::new(values, rec.sample_rate_hz())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(amp: f64, freq: f64, rate: u32, n: usize) -> AudioRecording {
        let x = (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / rate as f64).sin())
            .collect();
        AudioRecording::new(x, rate, "sine").unwrap()
    }

    #[test]
    fn sine_envelope_is_flat_in_interior() {
        let r = sine(0.8, 440.0, 16000, 16000);
        let env = hilbert_envelope(&r).unwrap();
        let n = env.len();
        for &v in &env.values()[n / 10..9 * n / 10] {
            assert!((v - 0.8).abs() / 0.8 < 0.01, "{v}");
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let r = AudioRecording::new(vec![0.0; 100], 1000, "z").unwrap();
        let env = hilbert_envelope(&r).unwrap();
        assert!(env.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_short() {
        let r = AudioRecording::new(vec![1.0], 1000, "one").unwrap();
        assert!(hilbert_envelope(&r).is_err());
    }

    #[test]
    fn odd_length_real_part_preserved() {
        let x: Vec<f64> = (0..101).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let a = analytic_signal(&x);
        for (c, v) in a.iter().zip(&x) {
            assert!((c.re - v).abs() < 1e-9);
        }
    }

    #[test]
    fn envelope_scales_linearly() {
        let x: Vec<f64> = (0..512)
            .map(|i| (i as f64 * 0.37).sin() + 0.3 * (i as f64 * 1.7).cos())
            .collect();
        let r = AudioRecording::new(x.clone(), 1000, "a").unwrap();
        let r3 = AudioRecording::new(x.iter().map(|v| 3.0 * v).collect(), 1000, "b").unwrap();
        let e1 = hilbert_envelope(&r).unwrap();
        let e3 = hilbert_envelope(&r3).unwrap();
        for (a, b) in e1.values().iter().zip(e3.values()) {
            assert!((3.0 * a - b).abs() < 1e-9);
        }
    }
}
