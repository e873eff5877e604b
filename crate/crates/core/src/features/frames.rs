use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{fft, AudioRecording};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub window_ms: f64,
    pub step_ms: f64,
    pub fft_length: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            window_ms: 30.0,
            step_ms: 15.0,
            fft_length: 512,
        }
    }
}

impl FrameConfig {
    /// Window and step in samples at `rate`.
    pub fn samples(&self, rate: u32) -> Result<(usize, usize)> {
        if !(self.window_ms > 0.0 && self.step_ms > 0.0 && self.step_ms <= self.window_ms) {
            return Err(Error::invalid("frame step must be positive and at most the window"));
        }
        if !self.fft_length.is_power_of_two() {
            return Err(Error::invalid(format!(
                "FFT length {} is not a power of two",
                self.fft_length
            )));
        }
        let w = ((self.window_ms * rate as f64 / 1000.0).round() as usize).max(1);
        let s = ((self.step_ms * rate as f64 / 1000.0).round() as usize).max(1);
        if self.fft_length < w {
            return Err(Error::invalid(format!(
                "FFT length {} shorter than the {w}-sample window",
                self.fft_length
            )));
        }
        Ok((w, s))
    }
}

/// `floor((n - w) / s) + 1`, or 0 when the signal is shorter than a window.
pub fn frame_count(n: usize, window: usize, step: usize) -> usize {
    if n < window {
        0
    } else {
        (n - window) / step + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frames {
    pub frames: Vec<Vec<f64>>,
    pub sample_rate_hz: u32,
    pub fft_length: usize,
}

impl Frames {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub fn frame_signal(rec: &AudioRecording, cfg: &FrameConfig) -> Result<Frames> {
    let (w, s) = cfg.samples(rec.sample_rate_hz())?;
    let x = rec.samples();
    let count = frame_count(x.len(), w, s);
    if count == 0 {
        return Err(Error::SignalTooShort {
            needed: w,
            got: x.len(),
        });
    }
    Ok(Frames {
        frames: (0..count).map(|i| x[i * s..i * s + w].to_vec()).collect(),
        sample_rate_hz: rec.sample_rate_hz(),
        fft_length: cfg.fft_length,
    })
}

/// Periodic Hann window.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// One-sided periodogram of each Hann-windowed, zero-padded frame,
/// `fft_length / 2 + 1` bins. Scaled so the bins sum to the energy of the
/// windowed frame (Parseval).
pub fn power_spectrum(frames: &Frames) -> Vec<Vec<f64>> {
    let nfft = frames.fft_length;
    let half = nfft / 2;
    let Some(first) = frames.frames.first() else {
        return Vec::new();
    };
    let window = hann_window(first.len());
    frames
        .frames
        .iter()
        .map(|f| {
            let windowed: Vec<f64> = f.iter().zip(&window).map(|(a, b)| a * b).collect();
            let spec = fft::forward(&windowed, nfft);
            (0..=half)
                .map(|k| {
                    let p = spec[k].norm_sqr() / nfft as f64;
                    if k == 0 || k == half {
                        p
                    } else {
                        2.0 * p
                    }
                })
                .collect()
        })
        .collect()
}

/// Sum a spectrum's bins into `bands` contiguous, equally wide groups.
pub fn power_bands(spectrum: &[f64], bands: usize) -> Vec<f64> {
    let n = spectrum.len();
    (0..bands)
        .map(|b| {
            let lo = b * n / bands;
            let hi = (b + 1) * n / bands;
            spectrum[lo..hi].iter().sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rec(n: usize, rate: u32) -> AudioRecording {
        AudioRecording::new(vec![0.1; n], rate, "r").unwrap()
    }

    #[test]
    fn frame_counts() {
        let cfg = FrameConfig::default();
        assert_eq!(frame_signal(&rec(6 * 16000, 16000), &cfg).unwrap().len(), 399);
        assert_eq!(frame_signal(&rec(20 * 16000, 16000), &cfg).unwrap().len(), 1332);
        assert_eq!(frame_signal(&rec(480, 16000), &cfg).unwrap().len(), 1);
        assert!(matches!(
            frame_signal(&rec(479, 16000), &cfg),
            Err(Error::SignalTooShort { .. })
        ));
    }

    #[test]
    fn parseval_on_random_frames() {
        let mut rng = crate::seed::rng(3, 0);
        let x: Vec<f64> = (0..4000).map(|_| rng.random::<f64>() - 0.5).collect();
        let r = AudioRecording::new(x, 16000, "n").unwrap();
        let frames = frame_signal(&r, &FrameConfig::default()).unwrap();
        let window = hann_window(480);
        for (f, s) in frames.frames.iter().zip(power_spectrum(&frames)) {
            let energy: f64 = f.iter().zip(&window).map(|(a, b)| (a * b).powi(2)).sum();
            let total: f64 = s.iter().sum();
            assert!((total - energy).abs() / energy < 1e-6);
        }
    }

    #[test]
    fn tone_has_single_dominant_bin() {
        // 1 kHz sits exactly on bin 32 of a 512-point FFT at 16 kHz.
        let x: Vec<f64> = (0..480)
            .map(|i| (2.0 * PI * 1000.0 * i as f64 / 16000.0).sin())
            .collect();
        let r = AudioRecording::new(x, 16000, "t").unwrap();
        let frames = frame_signal(&r, &FrameConfig::default()).unwrap();
        let s = &power_spectrum(&frames)[0];
        let argmax = (0..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap();
        assert_eq!(argmax, 32);
    }

    #[test]
    fn zero_frame_zero_spectrum() {
        let r = AudioRecording::new(vec![0.0; 480], 16000, "z").unwrap();
        let frames = frame_signal(&r, &FrameConfig::default()).unwrap();
        assert!(power_spectrum(&frames)[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bands_partition_spectrum() {
        let s: Vec<f64> = (0..257).map(|i| i as f64).collect();
        let b = power_bands(&s, 32);
        assert_eq!(b.len(), 32);
        assert_eq!(b.iter().sum::<f64>(), s.iter().sum::<f64>());
    }
}
