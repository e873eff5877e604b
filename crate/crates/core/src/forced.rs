//! Forced-maneuver front end: normalize, find the onset, clip, take the
//! smoothed Hilbert envelope as flow, and check the flow-volume shape.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flow::{flow_volume, shape_check_with, FlowTimeCurve, FlowVolumeCurve, ShapeConfig, ShapeVerdict};
use crate::seed;
use crate::signal::synth::ForcedParams;
use crate::signal::{
    clip_forced, design_kaiser_fir, detect_exhalation_start, hilbert_envelope, normalize, smooth_fir, AudioRecording,
    Envelope, ONSET_THRESHOLD,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManeuverCurves {
    /// Normalized audio from one second before the onset to the end.
    pub clip: AudioRecording,
    /// Onset position inside `clip`.
    pub onset: usize,
    pub envelope: Envelope,
    pub flow: FlowTimeCurve,
    pub curve: FlowVolumeCurve,
    pub verdict: ShapeVerdict,
}

impl ManeuverCurves {
    /// Index of the envelope peak inside `clip`.
    pub fn peak_index(&self) -> usize {
        self.curve.pef_index
    }
}

pub fn maneuver_curves(rec: &AudioRecording) -> Result<ManeuverCurves> {
    maneuver_curves_with(rec, &ShapeConfig::default())
}

pub fn maneuver_curves_with(rec: &AudioRecording, shape: &ShapeConfig) -> Result<ManeuverCurves> {
    let norm = normalize(rec);
    let onset = detect_exhalation_start(&norm, ONSET_THRESHOLD)?;
    let clip = clip_forced(&norm, onset)?;
    let onset = onset - (rec.len() - clip.len());
    let raw = hilbert_envelope(&clip)?;
    let envelope = smooth_fir(&raw, &design_kaiser_fir(clip.sample_rate_hz())?)?;
    let flow = FlowTimeCurve::from_envelope(&envelope)?;
    let curve = flow_volume(&flow);
    let verdict = shape_check_with(&curve, shape)?;
    Ok(ManeuverCurves {
        clip,
        onset,
        envelope,
        flow,
        curve,
        verdict,
    })
}

/// Seeded synthetic subjects, each performing several forced maneuvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectCorpusConfig {
    pub subjects: usize,
    pub maneuvers: usize,
    pub sample_rate_hz: u32,
    pub seed: u64,
}

impl Default for SubjectCorpusConfig {
    fn default() -> Self {
        Self {
            subjects: 5,
            maneuvers: 3,
            sample_rate_hz: 16000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticManeuver {
    pub subject_id: String,
    pub trial: u32,
    pub params: ForcedParams,
}

/// Subject-level PEF 4-10 L/s, FVC 2.5-5.5 L, rise 50-120 ms and recording
/// gain 0.3-0.7; each maneuver jitters PEF and FVC by up to 5 % and moves
/// the onset between 0.8 and 2 s.
pub fn synthetic_maneuvers(cfg: &SubjectCorpusConfig) -> Vec<SyntheticManeuver> {
    let mut out = Vec::with_capacity(cfg.subjects * cfg.maneuvers);
    for s in 0..cfg.subjects {
        let mut rng = seed::rng(cfg.seed, 2000 + s as u64);
        let pef = rng.random_range(4.0..10.0);
        let fvc = rng.random_range(2.5..5.5);
        let rise_s = rng.random_range(0.05..0.12);
        let gain = rng.random_range(0.3..0.7);
        for m in 0..cfg.maneuvers {
            let stream = (s * 1000 + m) as u64;
            let mut r = seed::rng(cfg.seed, 1_000_000 + stream);
            out.push(SyntheticManeuver {
                subject_id: format!("s{:02}", s + 1),
                trial: m as u32,
                params: ForcedParams {
                    onset_s: r.random_range(0.8..2.0),
                    pef_ls: pef * r.random_range(0.95..1.05),
                    fvc_l: fvc * r.random_range(0.95..1.05),
                    rise_s,
                    gain,
                    sample_rate_hz: cfg.sample_rate_hz,
                    seed: seed::derive_seed(cfg.seed, stream),
                    ..Default::default()
                },
            });
        }
    }
    out
}
