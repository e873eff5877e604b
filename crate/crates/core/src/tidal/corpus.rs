use rand::Rng;
use serde::{Deserialize, Serialize};

use super::vote::TidalClass;
use crate::error::{Error, Result};
use crate::seed;
use crate::signal::synth::{synth, BreathParams, NoiseParams, SpeechParams, SynthKind};
use crate::signal::AudioRecording;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecording {
    pub recording: AudioRecording,
    pub label: TidalClass,
    /// Ground-truth breathing rate for tidal recordings.
    pub bpm: Option<f64>,
}

/// Seeded three-class corpus: breathing bursts at 10-25 bpm, voiced speech
/// with 100-300 Hz fundamentals, and white noise, with randomized levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusConfig {
    pub per_class: usize,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            per_class: 12,
            duration_s: 20.0,
            sample_rate_hz: 16000,
            seed: 0,
        }
    }
}

pub fn synthetic_corpus(cfg: &CorpusConfig) -> Result<Vec<LabeledRecording>> {
    if cfg.per_class == 0 {
        return Err(Error::invalid("corpus needs at least one recording per class"));
    }
    let mut out = Vec::with_capacity(3 * cfg.per_class);
    for i in 0..cfg.per_class {
        for (c, class) in TidalClass::ALL.into_iter().enumerate() {
            let idx = (3 * i + c) as u64;
            let mut rng = seed::rng(cfg.seed, 1000 + idx);
            let rec_seed = seed::derive_seed(cfg.seed, idx);
            let (kind, bpm) = match class {
                TidalClass::Tidal => {
                    let bpm = rng.random_range(10.0..25.0);
                    (
                        SynthKind::Breath(BreathParams {
                            bpm,
                            duration_s: cfg.duration_s,
                            sample_rate_hz: cfg.sample_rate_hz,
                            seed: rec_seed,
                            amplitude: rng.random_range(0.15..0.45),
                            ..Default::default()
                        }),
                        Some(bpm),
                    )
                }
                TidalClass::Speech => (
                    SynthKind::Speech(SpeechParams {
                        f0_hz: rng.random_range(100.0..300.0),
                        duration_s: cfg.duration_s,
                        sample_rate_hz: cfg.sample_rate_hz,
                        seed: rec_seed,
                        amplitude: rng.random_range(0.1..0.4),
                        ..Default::default()
                    }),
                    None,
                ),
                TidalClass::Noise => (
                    SynthKind::Noise(NoiseParams {
                        std: rng.random_range(0.03..0.2),
                        duration_s: cfg.duration_s,
                        sample_rate_hz: cfg.sample_rate_hz,
                        seed: rec_seed,
                    }),
                    None,
                ),
            };
            let rec = synth(&kind)?;
            let recording = AudioRecording::new(
                rec.into_samples(),
                cfg.sample_rate_hz,
                format!("{}-{i:03}", class.as_str()),
            )?;
            out.push(LabeledRecording {
                recording,
                label: class,
                bpm,
            });
        }
    }
    Ok(out)
}
