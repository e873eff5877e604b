use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{mel_filterbank, power_spectrum, Frames, LOG_EPSILON};
use crate::signal::AudioRecording;

/// Window slicing and per-window log mel energies.
///
/// Inside a window, frames of `frame_ms` (capped at `fft_length` samples)
/// are taken back to back; each frame yields `mel_bands` log energies over
/// `[0, min(fmax_hz, Nyquist)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_s: f64,
    pub offset_s: f64,
    pub fft_length: usize,
    pub mel_bands: usize,
    pub frame_ms: f64,
    pub fmax_hz: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            window_s: 2.0,
            offset_s: 1.0,
            fft_length: 256,
            mel_bands: 20,
            frame_ms: 25.0,
            fmax_hz: 1000.0,
        }
    }
}

impl WindowConfig {
    /// Window, offset and frame lengths in samples.
    pub fn samples(&self, rate: u32) -> Result<(usize, usize, usize)> {
        if !(self.window_s > 0.0 && self.offset_s > 0.0) {
            return Err(Error::invalid("window and offset must be positive"));
        }
        if self.offset_s > self.window_s {
            return Err(Error::invalid("offset can be at most the window length"));
        }
        if !self.fft_length.is_power_of_two() || self.mel_bands == 0 || !(self.frame_ms > 0.0) {
            return Err(Error::invalid("bad frame settings"));
        }
        let r = rate as f64;
        let w = (self.window_s * r).round() as usize;
        let o = ((self.offset_s * r).round() as usize).max(1);
        let f = ((self.frame_ms * r / 1000.0).round() as usize).clamp(2, self.fft_length);
        if w < f {
            return Err(Error::invalid("window shorter than one frame"));
        }
        Ok((w, o, f))
    }

    /// `(bands, frames)` shape of each window's feature map at `rate`.
    pub fn map_shape(&self, rate: u32) -> Result<(usize, usize)> {
        let (w, _, f) = self.samples(rate)?;
        Ok((self.mel_bands, w / f))
    }
}

/// `floor((n - window) / offset) + 1`, 0 when `n < window`.
pub fn window_count(n: usize, window: usize, offset: usize) -> usize {
    if n < window {
        0
    } else {
        (n - window) / offset + 1
    }
}

/// Feature maps of one recording, each `bands x frames` stored band-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TidalWindowBatch {
    pub windows: Vec<Vec<f64>>,
    pub bands: usize,
    pub frames: usize,
    pub window_s: f64,
    pub offset_s: f64,
    pub sample_rate_hz: u32,
    pub source: String,
}

impl TidalWindowBatch {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// Slice an already band-limited recording into windows.
pub fn slice_windows(rec: &AudioRecording, cfg: &WindowConfig) -> Result<TidalWindowBatch> {
    let rate = rec.sample_rate_hz();
    let (w, o, f) = cfg.samples(rate)?;
    let count = window_count(rec.len(), w, o);
    if count == 0 {
        return Err(Error::SignalTooShort {
            needed: w,
            got: rec.len(),
        });
    }
    let fmax = cfg.fmax_hz.min(rate as f64 / 2.0);
    let fb = mel_filterbank(cfg.mel_bands, cfg.fft_length, rate, 0.0, fmax);
    let frames_per = w / f;
    let x = rec.samples();
    let windows = (0..count)
        .map(|k| {
            let start = k * o;
            let frames = Frames {
                frames: (0..frames_per)
                    .map(|j| x[start + j * f..start + (j + 1) * f].to_vec())
                    .collect(),
                sample_rate_hz: rate,
                fft_length: cfg.fft_length,
            };
            let spectra = power_spectrum(&frames);
            let mut map = vec![0.0; cfg.mel_bands * frames_per];
            for (j, s) in spectra.iter().enumerate() {
                for (b, filt) in fb.iter().enumerate() {
                    let e: f64 = filt.iter().zip(s).map(|(a, p)| a * p).sum();
                    map[b * frames_per + j] = (e + LOG_EPSILON).ln();
                }
            }
            map
        })
        .collect();
    Ok(TidalWindowBatch {
        windows,
        bands: cfg.mel_bands,
        frames: frames_per,
        window_s: cfg.window_s,
        offset_s: cfg.offset_s,
        sample_rate_hz: rate,
        source: rec.source_id().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(seconds: f64, rate: u32) -> AudioRecording {
        let n = (seconds * rate as f64) as usize;
        let x = (0..n).map(|i| ((i * 37 % 101) as f64 / 101.0) - 0.5).collect();
        AudioRecording::new(x, rate, "t").unwrap()
    }

    #[test]
    fn counts() {
        let cfg = WindowConfig::default();
        assert_eq!(slice_windows(&rec(20.0, 4000), &cfg).unwrap().len(), 19);
        let whole = WindowConfig {
            window_s: 20.0,
            offset_s: 20.0,
            ..cfg.clone()
        };
        assert_eq!(slice_windows(&rec(20.0, 4000), &whole).unwrap().len(), 1);
        let tiled = WindowConfig {
            window_s: 3.0,
            offset_s: 3.0,
            ..cfg.clone()
        };
        assert_eq!(slice_windows(&rec(20.0, 4000), &tiled).unwrap().len(), 6);
        assert!(matches!(
            slice_windows(&rec(1.0, 4000), &cfg),
            Err(Error::SignalTooShort { .. })
        ));
        let bad = WindowConfig { offset_s: 3.0, ..cfg };
        assert!(slice_windows(&rec(20.0, 4000), &bad).is_err());
    }

    #[test]
    fn map_shape_matches() {
        let cfg = WindowConfig::default();
        let b = slice_windows(&rec(4.0, 16000), &cfg).unwrap();
        assert_eq!((b.bands, b.frames), cfg.map_shape(16000).unwrap());
        assert_eq!(b.windows[0].len(), b.bands * b.frames);
        // 25 ms frames are capped at the 256-point FFT: 2 s / 16 ms.
        assert_eq!(b.frames, 125);
    }
}
