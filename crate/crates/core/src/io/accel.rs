//! Chest-worn accelerometer traces and the ground-truth respiration rate
//! derived from them.

use std::fs::File;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::signal::synth::BreathParams;
use crate::signal::{detect_peaks, fft, moving_average, Envelope};
use crate::tidal::RespirationResult;

pub const ACCEL_RATE_HZ: u32 = 100;
/// Shortest trace accepted by [`accel_rr`].
pub const MIN_ACCEL_DURATION_S: f64 = 10.0;
const GRAVITY: f64 = 9.81;

/// Three-axis samples on a common, strictly increasing time base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccelTrace {
    t_s: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AccelRow {
    t_s: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl AccelTrace {
    pub fn new(t_s: Vec<f64>, x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        let n = t_s.len();
        if x.len() != n || y.len() != n || z.len() != n {
            return Err(Error::invalid("accelerometer axes differ in length"));
        }
        if n < 2 {
            return Err(Error::invalid("accelerometer trace needs at least 2 samples"));
        }
        if let Some(i) = t_s.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(format!(
                "time is not strictly increasing at sample {}",
                i + 1
            )));
        }
        if [&t_s, &x, &y, &z].iter().any(|v| v.iter().any(|s| !s.is_finite())) {
            return Err(Error::invalid("non-finite accelerometer sample"));
        }
        Ok(Self { t_s, x, y, z })
    }

    /// Samples taken at `rate_hz` starting from t = 0.
    pub fn from_axes(x: Vec<f64>, y: Vec<f64>, z: Vec<f64>, rate_hz: u32) -> Result<Self> {
        if rate_hz == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        let t_s = (0..x.len()).map(|i| i as f64 / rate_hz as f64).collect();
        Self::new(t_s, x, y, z)
    }

    pub fn t_s(&self) -> &[f64] {
        &self.t_s
    }

    pub fn axes(&self) -> [&[f64]; 3] {
        [&self.x, &self.y, &self.z]
    }

    pub fn len(&self) -> usize {
        self.t_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_s.is_empty()
    }

    /// Nominal rate from the mean sample spacing, rounded to whole Hz.
    pub fn rate_hz(&self) -> u32 {
        let span = self.t_s[self.len() - 1] - self.t_s[0];
        (((self.len() - 1) as f64 / span).round() as u32).max(1)
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.rate_hz() as f64
    }
}

pub fn load_accel_csv(path: &Path) -> Result<AccelTrace> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut cols: [Vec<f64>; 4] = Default::default();
    for row in reader.deserialize() {
        let r: AccelRow = row?;
        cols[0].push(r.t_s);
        cols[1].push(r.x);
        cols[2].push(r.y);
        cols[3].push(r.z);
    }
    let [t, x, y, z] = cols;
    AccelTrace::new(t, x, y, z)
}

pub fn save_accel_csv(trace: &AccelTrace, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for i in 0..trace.len() {
        w.serialize(AccelRow {
            t_s: trace.t_s[i],
            x: trace.x[i],
            y: trace.y[i],
            z: trace.z[i],
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Smoothing and peak settings for [`accel_rr`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccelConfig {
    /// Moving-average length in samples; 70 is the heavier alternative.
    pub window: usize,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub min_separation_s: f64,
    /// Minimum prominence as a fraction of the smoothed signal's range.
    pub prominence_fraction: f64,
}

impl Default for AccelConfig {
    fn default() -> Self {
        Self {
            window: 20,
            band_low_hz: 0.1,
            band_high_hz: 0.7,
            min_separation_s: 1.5,
            prominence_fraction: 0.3,
        }
    }
}

/// Power of `x` (mean removed) between `lo` and `hi` Hz.
pub fn band_power(x: &[f64], rate_hz: f64, lo: f64, hi: f64) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let spec = fft::forward(&centered, n);
    (1..=n / 2)
        .filter(|&k| {
            let f = k as f64 * rate_hz / n as f64;
            f >= lo && f <= hi
        })
        .map(|k| spec[k].norm_sqr())
        .sum()
}

/// Axis index (0 = x, 1 = y, 2 = z) with the most breathing-band power;
/// the first wins ties.
pub fn dominant_axis(trace: &AccelTrace, cfg: &AccelConfig) -> usize {
    let rate = trace.rate_hz() as f64;
    let powers = trace
        .axes()
        .map(|a| band_power(a, rate, cfg.band_low_hz, cfg.band_high_hz));
    let mut best = 0;
    for (i, p) in powers.iter().enumerate() {
        if *p > powers[best] {
            best = i;
        }
    }
    best
}

pub fn accel_rr(trace: &AccelTrace) -> Result<RespirationResult> {
    accel_rr_with(trace, &AccelConfig::default(), "")
}

/// Respiration rate from chest motion: smooth the dominant axis, then
/// `60 / mean peak gap`. A flat or peakless trace is rejected.
pub fn accel_rr_with(trace: &AccelTrace, cfg: &AccelConfig, source: &str) -> Result<RespirationResult> {
    let rate = trace.rate_hz();
    let duration_s = trace.duration_s();
    if duration_s < MIN_ACCEL_DURATION_S {
        return Err(Error::SignalTooShort {
            needed: (MIN_ACCEL_DURATION_S * rate as f64).ceil() as usize,
            got: trace.len(),
        });
    }
    let axis = trace.axes()[dominant_axis(trace, cfg)];
    let smooth = moving_average(axis, cfg.window)?;
    let lo = smooth.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = smooth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 1e-12 * hi.abs().max(1.0)) {
        return Ok(RespirationResult::rejected(source, duration_s));
    }
    let env = Envelope::new(smooth.iter().map(|v| v - lo).collect(), rate)?;
    match detect_peaks(&env, cfg.min_separation_s, cfg.prominence_fraction * range) {
        Ok(peaks) => Ok(RespirationResult {
            source: source.to_string(),
            rate_bpm: Some(crate::tidal::rate_from_gap(peaks.mean_peak_to_peak_s)),
            peak_set: Some(peaks),
            rejected: false,
            duration_s,
        }),
        Err(Error::InsufficientPeaks { .. }) => Ok(RespirationResult::rejected(source, duration_s)),
        Err(e) => Err(e),
    }
}

/// Synthetic chest motion on the same breathing schedule as a synthetic
/// breathing recording: the chest expands and contracts once per period,
/// fully expanded when each exhalation burst begins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChestMotionParams {
    pub breath: BreathParams,
    /// Peak-to-peak excursion on the breathing axis, m/s^2.
    pub amplitude: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for ChestMotionParams {
    fn default() -> Self {
        Self {
            breath: BreathParams::default(),
            amplitude: 0.05,
            noise_std: 0.01,
            seed: 0,
        }
    }
}

/// z carries gravity plus the breathing excursion; x and y carry only noise.
pub fn chest_motion(p: &ChestMotionParams) -> Result<AccelTrace> {
    let b = &p.breath;
    if !(b.bpm > 0.0 && b.duration_s > 0.0) {
        return Err(Error::invalid("chest motion needs a positive rate and duration"));
    }
    let rate = ACCEL_RATE_HZ as f64;
    let n = (b.duration_s * rate).round() as usize;
    let period = b.period_s();
    // first burst starts at (1/2 - duty/2) periods
    let phase = (0.5 - b.duty / 2.0) * period;
    let noise = Normal::new(0.0, p.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = seed::rng(p.seed, 0);
    let mut axis = |base: f64, scale: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                let v = 0.5 * (1.0 + (2.0 * std::f64::consts::PI * (t - phase) / period).cos());
                base + scale * v + noise.sample(&mut rng)
            })
            .collect()
    };
    let x = axis(0.0, 0.0);
    let y = axis(0.0, 0.0);
    let z = axis(GRAVITY, p.amplitude);
    AccelTrace::from_axes(x, y, z, ACCEL_RATE_HZ)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sinusoid(hz: f64, seconds: f64, noise: f64, seed: u64) -> AccelTrace {
        let n = (seconds * ACCEL_RATE_HZ as f64) as usize;
        let dist = Normal::new(0.0, noise).unwrap();
        let mut rng = seed::rng(seed, 0);
        let mut axis = |amp: f64, off: f64| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let t = i as f64 / ACCEL_RATE_HZ as f64;
                    off + amp * (2.0 * std::f64::consts::PI * hz * t).sin() + dist.sample(&mut rng)
                })
                .collect()
        };
        let x = axis(0.0, 0.1);
        let y = axis(0.02, 9.8);
        let z = axis(0.0, 0.0);
        AccelTrace::from_axes(x, y, z, ACCEL_RATE_HZ).unwrap()
    }

    #[test]
    fn quarter_hertz_is_fifteen_bpm() {
        for seed in 0..5 {
            let t = sinusoid(0.25, 20.0, 0.005, seed);
            assert_eq!(dominant_axis(&t, &AccelConfig::default()), 1);
            let bpm = accel_rr(&t).unwrap().rate_bpm.unwrap();
            assert!((bpm - 15.0).abs() <= 0.5, "seed {seed}: {bpm}");
        }
    }

    #[test]
    fn constant_trace_rejected() {
        let n = 2000;
        let t = AccelTrace::from_axes(vec![0.0; n], vec![0.0; n], vec![9.81; n], 100).unwrap();
        let r = accel_rr(&t).unwrap();
        assert!(r.rejected && r.rate_bpm.is_none());
    }

    #[test]
    fn short_trace_refused() {
        let t = sinusoid(0.25, 5.0, 0.0, 0);
        assert!(matches!(accel_rr(&t), Err(Error::SignalTooShort { .. })));
    }

    #[test]
    fn heavier_window_also_works() {
        let t = sinusoid(0.3, 20.0, 0.01, 3);
        let cfg = AccelConfig {
            window: 70,
            ..Default::default()
        };
        let bpm = accel_rr_with(&t, &cfg, "t").unwrap().rate_bpm.unwrap();
        assert!((bpm - 18.0).abs() <= 0.5, "{bpm}");
    }

    #[test]
    fn validation() {
        assert!(AccelTrace::new(vec![0.0, 0.0], vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]).is_err());
        assert!(AccelTrace::new(vec![0.0, 1.0], vec![0.0; 2], vec![0.0; 3], vec![0.0; 2]).is_err());
        let t = sinusoid(0.25, 12.0, 0.0, 0);
        assert_eq!(t.rate_hz(), 100);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let t = chest_motion(&ChestMotionParams::default()).unwrap();
        save_accel_csv(&t, &path).unwrap();
        assert_eq!(load_accel_csv(&path).unwrap(), t);
    }
}
