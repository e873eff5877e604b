//! Seeded synthetic recordings used as test oracles and demo corpora.
//!
//! Each generator is a pure function of its parameter struct: the same
//! parameters (seed included) always produce bit-identical samples.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::{fft, AudioRecording};
use crate::error::{Error, Result};
use crate::seed;

/// Amplitude-modulated tone with harmonics: `m(t) * c(t) + noise`, where
/// `m(t) = 1 + depth * cos(2 pi f_m t)` and `c(t)` sums `harmonics` partials
/// of the carrier with amplitudes `1/h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmParams {
    pub carrier_hz: f64,
    pub message_hz: f64,
    pub depth: f64,
    pub harmonics: usize,
    pub noise_std: f64,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub seed: u64,
}

impl Default for AmParams {
    fn default() -> Self {
        Self {
            carrier_hz: 1000.0,
            message_hz: 2.0,
            depth: 0.5,
            harmonics: 3,
            noise_std: 0.02,
            duration_s: 2.0,
            sample_rate_hz: 16000,
            seed: 0,
        }
    }
}

impl AmParams {
    /// The modulating message `m(t)` sampled on the recording grid.
    pub fn message(&self) -> Vec<f64> {
        let n = sample_count(self.duration_s, self.sample_rate_hz);
        (0..n)
            .map(|i| {
                let t = i as f64 / self.sample_rate_hz as f64;
                1.0 + self.depth * (2.0 * PI * self.message_hz * t).cos()
            })
            .collect()
    }
}

/// Exhalation bursts of band-limited noise at a fixed breathing rate.
///
/// Burst `k` is centered at `(k + 1/2) * 60 / bpm` seconds and has a Hann
/// profile lasting `duty * 60 / bpm` seconds; bursts whose center falls past
/// the end of the recording are dropped. The burst carrier is noise confined
/// to `[band_low_hz, band_high_hz]` with a `1/f` power tilt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreathParams {
    pub bpm: f64,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub seed: u64,
    pub duty: f64,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub amplitude: f64,
    /// Constant white background, as a fraction of `amplitude`.
    pub floor: f64,
    /// Additional white noise at this SNR (burst power over noise power).
    pub snr_db: Option<f64>,
}

impl Default for BreathParams {
    fn default() -> Self {
        Self {
            bpm: 15.0,
            duration_s: 20.0,
            sample_rate_hz: 16000,
            seed: 0,
            duty: 0.4,
            band_low_hz: 80.0,
            band_high_hz: 400.0,
            amplitude: 0.3,
            floor: 0.005,
            snr_db: None,
        }
    }
}

impl BreathParams {
    pub fn period_s(&self) -> f64 {
        60.0 / self.bpm
    }

    /// Centers of the exhalation bursts, seconds.
    pub fn burst_centers(&self) -> Vec<f64> {
        let period = self.period_s();
        (0..)
            .map(|k| (k as f64 + 0.5) * period)
            .take_while(|&c| c < self.duration_s)
            .collect()
    }

    /// Burst profile (0..=1) on a grid of `rate` samples per second.
    pub fn profile(&self, rate: f64) -> Vec<f64> {
        let n = (self.duration_s * rate).round() as usize;
        let width = self.duty * self.period_s();
        let mut out = vec![0.0; n];
        for c in self.burst_centers() {
            let lo = (((c - width / 2.0) * rate).floor().max(0.0)) as usize;
            let hi = ((((c + width / 2.0) * rate).ceil()) as usize).min(n);
            for (i, o) in out.iter_mut().enumerate().take(hi).skip(lo) {
                let u = (i as f64 / rate - (c - width / 2.0)) / width;
                if (0.0..=1.0).contains(&u) {
                    *o += (PI * u).sin().powi(2);
                }
            }
        }
        out
    }
}

/// A single forced exhalation: silence, a linear rise of `rise_s` to the
/// peak flow, then an exponential decay `exp(-s/tau)`. `tau` is chosen so
/// the flow integrated over an unbounded horizon equals `fvc_l`; the
/// reported FVC is the volume actually exhaled before the recording ends.
///
/// The audio carries the flow in two noise bands: a low band whose amplitude
/// follows flow and a high band following flow squared (turbulence), so the
/// spectral balance still encodes flow after amplitude normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcedParams {
    pub onset_s: f64,
    pub duration_s: f64,
    pub pef_ls: f64,
    pub fvc_l: f64,
    pub rise_s: f64,
    pub sample_rate_hz: u32,
    pub seed: u64,
    pub noise_floor: f64,
    pub gain: f64,
}

impl Default for ForcedParams {
    fn default() -> Self {
        Self {
            onset_s: 1.5,
            duration_s: 7.0,
            pef_ls: 6.0,
            fvc_l: 4.0,
            rise_s: 0.08,
            sample_rate_hz: 16000,
            seed: 0,
            noise_floor: 1e-3,
            gain: 0.5,
        }
    }
}

/// Reference flow for the turbulence band, L/s.
const TURBULENCE_REF_FLOW: f64 = 8.0;

impl ForcedParams {
    /// Decay time constant, seconds.
    pub fn decay_s(&self) -> f64 {
        (self.fvc_l - self.pef_ls * self.rise_s / 2.0) / self.pef_ls
    }

    /// Flow in L/s at time `t` seconds.
    pub fn flow_at(&self, t: f64) -> f64 {
        let s = t - self.onset_s;
        if s < 0.0 || t >= self.duration_s {
            0.0
        } else if s < self.rise_s {
            self.pef_ls * s / self.rise_s
        } else {
            self.pef_ls * (-(s - self.rise_s) / self.decay_s()).exp()
        }
    }

    /// Volume exhaled by `s` seconds after onset, liters.
    pub fn volume_after(&self, s: f64) -> f64 {
        let s = s.min(self.duration_s - self.onset_s);
        if s <= 0.0 {
            return 0.0;
        }
        if s <= self.rise_s {
            return self.pef_ls * s * s / (2.0 * self.rise_s);
        }
        let tau = self.decay_s();
        self.pef_ls * self.rise_s / 2.0 + self.pef_ls * tau * (1.0 - (-(s - self.rise_s) / tau).exp())
    }

    /// (PEF L/s, FEV1 L, FVC L) implied by the flow model.
    pub fn truth(&self) -> (f64, f64, f64) {
        (self.pef_ls, self.volume_after(1.0), self.volume_after(f64::INFINITY))
    }

    fn validate(&self) -> Result<()> {
        if !(self.pef_ls > 0.0 && self.fvc_l > 0.0 && self.rise_s > 0.0) {
            return Err(Error::invalid("forced maneuver needs positive PEF, FVC and rise"));
        }
        if self.decay_s() <= 0.0 {
            return Err(Error::invalid("FVC too small for the PEF and rise time"));
        }
        if !(self.onset_s >= 0.0 && self.onset_s < self.duration_s) {
            return Err(Error::invalid("onset must lie inside the recording"));
        }
        Ok(())
    }
}

/// White Gaussian noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub std: f64,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            std: 0.1,
            duration_s: 2.0,
            sample_rate_hz: 16000,
            seed: 0,
        }
    }
}

/// Voiced syllables: harmonic stacks on a drifting fundamental, gated on
/// and off at a syllabic rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechParams {
    pub f0_hz: f64,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub seed: u64,
    pub amplitude: f64,
    pub max_harmonic_hz: f64,
}

impl Default for SpeechParams {
    fn default() -> Self {
        Self {
            f0_hz: 150.0,
            duration_s: 2.0,
            sample_rate_hz: 16000,
            seed: 0,
            amplitude: 0.3,
            max_harmonic_hz: 4000.0,
        }
    }
}

/// Which generator to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthKind {
    Am(AmParams),
    Breath(BreathParams),
    Forced(ForcedParams),
    Noise(NoiseParams),
    Speech(SpeechParams),
}

fn sample_count(duration_s: f64, rate: u32) -> usize {
    (duration_s * rate as f64).round() as usize
}

fn check_common(duration_s: f64, rate: u32) -> Result<usize> {
    if rate == 0 || !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(Error::invalid("duration and sample rate must be positive"));
    }
    let n = sample_count(duration_s, rate);
    if n < 2 {
        return Err(Error::invalid("synthetic recording would be shorter than 2 samples"));
    }
    Ok(n)
}

/// Unit-RMS noise restricted to `[lo, hi]` Hz, power density `∝ f^-tilt`.
pub fn band_noise<R: Rng>(n: usize, rate: f64, lo: f64, hi: f64, tilt: f64, rng: &mut R) -> Vec<f64> {
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    let half = n / 2;
    for k in 1..=half {
        let f = k as f64 * rate / n as f64;
        if f < lo || f > hi {
            continue;
        }
        let weight = f.powf(-tilt / 2.0);
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        spec[k] = Complex::new(re, im) * weight;
        if k != n - k {
            spec[n - k] = spec[k].conj();
        } else {
            spec[k].im = 0.0;
        }
    }
    fft::inverse_in_place(&mut spec);
    let mut x: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v /= rms);
    }
    x
}

fn white<R: Rng>(n: usize, std: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn am(p: &AmParams) -> Result<Vec<f64>> {
    let n = check_common(p.duration_s, p.sample_rate_hz)?;
    let nyquist = p.sample_rate_hz as f64 / 2.0;
    if !(p.carrier_hz > 0.0 && p.carrier_hz < nyquist) || p.harmonics == 0 {
        return Err(Error::invalid(
            "carrier must be below Nyquist with at least one harmonic",
        ));
    }
    let mut rng = seed::rng(p.seed, 0);
    let phases: Vec<f64> = (0..p.harmonics).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
    let noise = white(n, p.noise_std, &mut rng);
    let message = p.message();
    let rate = p.sample_rate_hz as f64;
    Ok((0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let carrier: f64 = phases
                .iter()
                .enumerate()
                .map(|(h, ph)| {
                    let f = p.carrier_hz * (h + 1) as f64;
                    if f < nyquist {
                        (2.0 * PI * f * t + ph).sin() / (h + 1) as f64
                    } else {
                        0.0
                    }
                })
                .sum();
            message[i] * carrier + noise[i]
        })
        .collect())
}

fn breath(p: &BreathParams) -> Result<Vec<f64>> {
    let n = check_common(p.duration_s, p.sample_rate_hz)?;
    if !(p.bpm > 0.0) || !(p.duty > 0.0 && p.duty <= 1.0) {
        return Err(Error::invalid("breath needs positive bpm and duty in (0, 1]"));
    }
    let rate = p.sample_rate_hz as f64;
    let hi = p.band_high_hz.min(0.45 * rate);
    if !(p.band_low_hz > 0.0 && p.band_low_hz < hi) {
        return Err(Error::invalid("breath band must be nonempty and below Nyquist"));
    }
    let mut rng = seed::rng(p.seed, 1);
    let carrier = band_noise(n, rate, p.band_low_hz, hi, 1.0, &mut rng);
    let profile = p.profile(rate);
    let floor = white(n, p.floor * p.amplitude, &mut rng);
    let mut x: Vec<f64> = (0..n)
        .map(|i| p.amplitude * profile[i] * carrier[i] + floor[i])
        .collect();
    if let Some(snr) = p.snr_db {
        let power = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let std = (power / 10f64.powf(snr / 10.0)).sqrt();
        let noise = white(n, std, &mut rng);
        x.iter_mut().zip(noise).for_each(|(a, b)| *a += b);
    }
    Ok(x)
}

fn forced(p: &ForcedParams) -> Result<Vec<f64>> {
    let n = check_common(p.duration_s, p.sample_rate_hz)?;
    p.validate()?;
    let rate = p.sample_rate_hz as f64;
    let nyquist = rate / 2.0;
    let mut rng = seed::rng(p.seed, 2);
    let low = band_noise(n, rate, 100.0, 1200.0f64.min(0.9 * nyquist), 0.5, &mut rng);
    let high = band_noise(
        n,
        rate,
        1200.0f64.min(0.5 * nyquist),
        5000.0f64.min(0.9 * nyquist),
        0.0,
        &mut rng,
    );
    let floor = white(n, p.noise_floor, &mut rng);
    Ok((0..n)
        .map(|i| {
            let q = p.flow_at(i as f64 / rate) / TURBULENCE_REF_FLOW;
            p.gain * (q * low[i] + 0.8 * q * q * high[i]) + floor[i]
        })
        .collect())
}

fn speech(p: &SpeechParams) -> Result<Vec<f64>> {
    let n = check_common(p.duration_s, p.sample_rate_hz)?;
    if !(p.f0_hz > 0.0) {
        return Err(Error::invalid("speech needs a positive fundamental"));
    }
    let rate = p.sample_rate_hz as f64;
    let top = p.max_harmonic_hz.min(0.45 * rate);
    let harmonics = ((top / (p.f0_hz * 1.15)).floor() as usize).max(1);
    let mut rng = seed::rng(p.seed, 3);

    // Syllable gate: voiced spans of 120-300 ms separated by 40-150 ms pauses.
    let mut gate = vec![0.0; n];
    let mut t = rng.random::<f64>() * 0.1;
    while t < p.duration_s {
        let len = 0.12 + 0.18 * rng.random::<f64>();
        let lo = (t * rate) as usize;
        let hi = (((t + len) * rate) as usize).min(n);
        for (i, g) in gate.iter_mut().enumerate().take(hi).skip(lo) {
            let u = (i - lo) as f64 / (hi - lo).max(1) as f64;
            *g = (PI * u).sin().powf(0.5);
        }
        t += len + 0.04 + 0.11 * rng.random::<f64>();
    }

    let drift_hz = 0.5 + rng.random::<f64>();
    let drift_phase = rng.random::<f64>() * 2.0 * PI;
    let formant = 500.0 + 400.0 * rng.random::<f64>();
    let weights: Vec<f64> = (1..=harmonics)
        .map(|h| {
            let f = h as f64 * p.f0_hz;
            (1.0 / h as f64) * (1.0 + 2.0 * (-((f - formant) / 200.0).powi(2)).exp())
        })
        .collect();
    let mut phase = 0.0;
    let mut x = Vec::with_capacity(n);
    for (i, g) in gate.iter().enumerate() {
        let tt = i as f64 / rate;
        let f0 = p.f0_hz * (1.0 + 0.08 * (2.0 * PI * drift_hz * tt + drift_phase).sin());
        phase += 2.0 * PI * f0 / rate;
        if *g == 0.0 {
            x.push(0.0);
            continue;
        }
        let s: f64 = weights
            .iter()
            .enumerate()
            .map(|(h, w)| w * ((h + 1) as f64 * phase).sin())
            .sum();
        x.push(p.amplitude * g * s);
    }
    let floor = white(n, 0.002 * p.amplitude, &mut rng);
    x.iter_mut().zip(floor).for_each(|(a, b)| *a += b);
    Ok(x)
}

/// Run a generator.
pub fn synth(kind: &SynthKind) -> Result<AudioRecording> {
    let (samples, rate, name) = match kind {
        SynthKind::Am(p) => (am(p)?, p.sample_rate_hz, format!("synth-am-{}", p.seed)),
        SynthKind::Breath(p) => (breath(p)?, p.sample_rate_hz, format!("synth-breath-{}", p.seed)),
        SynthKind::Forced(p) => (forced(p)?, p.sample_rate_hz, format!("synth-forced-{}", p.seed)),
        SynthKind::Noise(p) => {
            let n = check_common(p.duration_s, p.sample_rate_hz)?;
            if !(p.std >= 0.0) {
                return Err(Error::invalid("noise std must be nonnegative"));
            }
            let mut rng = seed::rng(p.seed, 4);
            (
                white(n, p.std, &mut rng),
                p.sample_rate_hz,
                format!("synth-noise-{}", p.seed),
            )
        }
        SynthKind::Speech(p) => (speech(p)?, p.sample_rate_hz, format!("synth-speech-{}", p.seed)),
    };
    AudioRecording::new(samples, rate, name)
}
