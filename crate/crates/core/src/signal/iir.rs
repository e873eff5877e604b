//! Butterworth band-pass for the tidal pipeline.
//!
//! The band-pass is a 4th-order Butterworth high-pass at 50 Hz cascaded
//! with a 4th-order Butterworth low-pass at 500 Hz, each realized as two
//! bilinear-transformed biquads (pole-pair Q values `1 / (2 cos(pi/8))` and
//! `1 / (2 cos(3 pi/8))`), and run forward then backward.

use std::f64::consts::PI;

use super::AudioRecording;
use crate::error::{Error, Result};

pub const TIDAL_BAND_LOW_HZ: f64 = 50.0;
pub const TIDAL_BAND_HIGH_HZ: f64 = 500.0;
const BUTTERWORTH_ORDER: usize = 4;

/// Second-order section, direct form II transposed, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn from_raw(b: [f64; 3], a: [f64; 3]) -> Self {
        Self {
            b: [b[0] / a[0], b[1] / a[0], b[2] / a[0]],
            a: [a[1] / a[0], a[2] / a[0]],
        }
    }

    pub fn lowpass(cutoff_hz: f64, sample_rate_hz: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / sample_rate_hz;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_raw(
            [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    pub fn highpass(cutoff_hz: f64, sample_rate_hz: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / sample_rate_hz;
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_raw(
            [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Filter `x` in place, starting from the steady state for a constant
    /// input equal to `x[0]`.
    fn run(&self, x: &mut [f64]) {
        let Some(&u) = x.first() else { return };
        let y_ss = self.dc_gain() * u;
        let mut z1 = y_ss - self.b[0] * u;
        let mut z2 = self.b[2] * u - self.a[1] * y_ss;
        for v in x.iter_mut() {
            let input = *v;
            let out = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * out + z2;
            z2 = self.b[2] * input - self.a[1] * out;
            *v = out;
        }
    }

    /// Magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        use rustfft::num_complex::Complex;
        let w = 2.0 * PI * freq_hz / sample_rate_hz;
        let z1 = Complex::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = Complex::new(1.0, 0.0) + z1 * self.a[0] + z2 * self.a[1];
        (num / den).norm()
    }
}

fn butterworth_qs(order: usize) -> Vec<f64> {
    (0..order / 2)
        .map(|k| 1.0 / (2.0 * (PI * (2 * k + 1) as f64 / (2 * order) as f64).cos()))
        .collect()
}

pub(crate) fn tidal_sections(sample_rate_hz: f64) -> Vec<Biquad> {
    let qs = butterworth_qs(BUTTERWORTH_ORDER);
    let mut sections: Vec<Biquad> = qs
        .iter()
        .map(|&q| Biquad::highpass(TIDAL_BAND_LOW_HZ, sample_rate_hz, q))
        .collect();
    sections.extend(
        qs.iter()
            .map(|&q| Biquad::lowpass(TIDAL_BAND_HIGH_HZ, sample_rate_hz, q)),
    );
    sections
}

/// Zero-phase cascade: odd-reflection padding, forward pass, backward pass.
pub(crate) fn filtfilt_sections(x: &[f64], sections: &[Biquad], pad: usize) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = pad.min(n - 1);
    let mut buf = Vec::with_capacity(n + 2 * pad);
    buf.extend((1..=pad).rev().map(|k| 2.0 * x[0] - x[k]));
    buf.extend_from_slice(x);
    buf.extend((1..=pad).map(|k| 2.0 * x[n - 1] - x[n - 1 - k]));
    for s in sections {
        s.run(&mut buf);
    }
    buf.reverse();
    for s in sections {
        s.run(&mut buf);
    }
    buf.reverse();
    buf[pad..pad + n].to_vec()
}

/// Zero-phase Butterworth band-pass, 50-500 Hz.
pub fn bandpass_tidal(rec: &AudioRecording) -> Result<AudioRecording> {
    let rate = rec.sample_rate_hz();
    if rate <= 1000 {
        return Err(Error::invalid(format!(
            "sample rate {rate} Hz puts the 500 Hz band edge at or above Nyquist"
        )));
    }
    let sections = tidal_sections(rate as f64);
    // Three time constants of the low band edge.
    let pad = (3.0 * rate as f64 / TIDAL_BAND_LOW_HZ) as usize;
    rec.with_samples(filtfilt_sections(rec.samples(), &sections, pad))
}

/// Zero-phase 50 Hz Butterworth high-pass only, for rates where the
/// Nyquist frequency already bounds the band at or below 500 Hz.
pub fn highpass_tidal(rec: &AudioRecording) -> Result<AudioRecording> {
    let rate = rec.sample_rate_hz();
    if rate as f64 <= 2.0 * TIDAL_BAND_LOW_HZ {
        return Err(Error::invalid(format!(
            "sample rate {rate} Hz is too low for the tidal band"
        )));
    }
    let sections: Vec<Biquad> = butterworth_qs(BUTTERWORTH_ORDER)
        .iter()
        .map(|&q| Biquad::highpass(TIDAL_BAND_LOW_HZ, rate as f64, q))
        .collect();
    let pad = (3.0 * rate as f64 / TIDAL_BAND_LOW_HZ) as usize;
    rec.with_samples(filtfilt_sections(rec.samples(), &sections, pad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::fft::tone_amplitude;

    fn tone(freq: f64, rate: u32, seconds: f64) -> AudioRecording {
        let n = (rate as f64 * seconds) as usize;
        let x = (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / rate as f64).sin())
            .collect();
        AudioRecording::new(x, rate, "tone").unwrap()
    }

    fn gain_db(freq: f64) -> f64 {
        let rate = 16000;
        let out = bandpass_tidal(&tone(freq, rate, 2.0)).unwrap();
        20.0 * tone_amplitude(out.samples(), rate as f64, freq).log10()
    }

    #[test]
    fn passband_tone() {
        let rate = 16000;
        let out = bandpass_tidal(&tone(200.0, rate, 2.0)).unwrap();
        let g = tone_amplitude(out.samples(), rate as f64, 200.0);
        assert!((0.9..=1.0).contains(&g), "{g}");
    }

    #[test]
    fn stopband_tones() {
        assert!(gain_db(2000.0) <= -20.0);
        assert!(gain_db(10.0) <= -20.0);
        // One octave beyond each edge.
        assert!(gain_db(1000.0) <= -20.0, "{}", gain_db(1000.0));
        assert!(gain_db(25.0) <= -20.0, "{}", gain_db(25.0));
    }

    #[test]
    fn butterworth_half_power_at_edges() {
        let s = tidal_sections(16000.0);
        let mag = |f: f64| s.iter().map(|b| b.magnitude(f, 16000.0)).product::<f64>();
        // Each 4th-order half is -3 dB at its own edge; the other half is ~0 dB there.
        assert!((mag(500.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.01);
        assert!((mag(50.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.01);
    }

    #[test]
    fn low_rate_rejected() {
        assert!(bandpass_tidal(&tone(100.0, 1000, 1.0)).is_err());
    }

    #[test]
    fn zero_phase_pulse() {
        let rate = 16000u32;
        let n = 16000;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = (i as f64 - 8000.0) / rate as f64;
                (-(t / 0.01).powi(2)).exp() * (2.0 * PI * 200.0 * t).cos()
            })
            .collect();
        let out = bandpass_tidal(&AudioRecording::new(x, rate, "p").unwrap()).unwrap();
        let argmax = out
            .samples()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!((argmax as i64 - 8000).abs() <= 1, "{argmax}");
    }
}
