use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use spiro_core::forced::{synthetic_maneuvers, SubjectCorpusConfig};
use spiro_core::io::{
    chest_motion, save_accel_csv, save_manifest, save_wav, ChestMotionParams, Maneuver, Manifest, ManifestEntry,
    MaskType, SensorPosition,
};
use spiro_core::seed;
use spiro_core::signal::synth::{synth, BreathParams, ForcedParams, NoiseParams, SpeechParams, SynthKind};
use spiro_core::Error;

use crate::args::{Common, Format, SynthCmd};
use crate::{out_dir, print_json};

const DEFAULT_RATE: u32 = 16000;
const TIDAL_DURATION_S: f64 = 20.0;

#[derive(Serialize)]
struct Written {
    files: Vec<String>,
}

fn rel(out: &Path, p: &Path) -> String {
    p.strip_prefix(out).unwrap_or(p).display().to_string()
}

fn breath(bpm: f64, duration_s: f64, rate: u32, seed: u64) -> BreathParams {
    BreathParams {
        bpm,
        duration_s,
        sample_rate_hz: rate,
        seed,
        ..Default::default()
    }
}

fn parse_mask(s: &str) -> Result<MaskType> {
    match s.to_ascii_lowercase().as_str() {
        "n95" => Ok(MaskType::N95),
        "cloth" => Ok(MaskType::Cloth),
        other => Err(Error::InvalidInput(format!("unknown mask type {other:?}")).into()),
    }
}

pub fn run(c: &Common, cmd: &SynthCmd) -> Result<()> {
    let out = out_dir(c)?;
    let rate = c.rate.unwrap_or(DEFAULT_RATE);
    let kind = match cmd {
        SynthCmd::Dataset {
            subjects,
            maneuvers,
            positions,
            tidal,
            mask,
        } => return dataset(c, *subjects, *maneuvers, *positions, *tidal, parse_mask(mask)?),
        SynthCmd::Accel { bpm, duration } => {
            let trace = chest_motion(&ChestMotionParams {
                breath: breath(*bpm, *duration, rate, c.seed),
                seed: c.seed,
                ..Default::default()
            })?;
            let path = out.join("accel.csv");
            save_accel_csv(&trace, &path)?;
            return print_json(&Written {
                files: vec![rel(out, &path)],
            });
        }
        SynthCmd::Forced { pef, fvc, duration } => SynthKind::Forced(ForcedParams {
            pef_ls: *pef,
            fvc_l: *fvc,
            duration_s: *duration,
            sample_rate_hz: rate,
            seed: c.seed,
            ..Default::default()
        }),
        SynthCmd::Breath { bpm, duration, snr } => SynthKind::Breath(BreathParams {
            snr_db: *snr,
            ..breath(*bpm, *duration, rate, c.seed)
        }),
        SynthCmd::Speech { f0, duration } => SynthKind::Speech(SpeechParams {
            f0_hz: *f0,
            duration_s: *duration,
            sample_rate_hz: rate,
            seed: c.seed,
            ..Default::default()
        }),
        SynthCmd::Noise { std, duration } => SynthKind::Noise(NoiseParams {
            std: *std,
            duration_s: *duration,
            sample_rate_hz: rate,
            seed: c.seed,
        }),
    };
    let name = match kind {
        SynthKind::Forced(_) => "forced",
        SynthKind::Breath(_) => "breath",
        SynthKind::Speech(_) => "speech",
        SynthKind::Noise(_) => "noise",
        SynthKind::Am(_) => "am",
    };
    let path = out.join(format!("{name}.wav"));
    save_wav(&synth(&kind)?, &path)?;
    print_json(&Written {
        files: vec![rel(out, &path)],
    })
}

fn placements(positions: bool) -> Vec<SensorPosition> {
    if positions {
        SensorPosition::ALL[..5].to_vec()
    } else {
        vec![SensorPosition::C1]
    }
}

fn entry(
    subject: &str,
    mask: MaskType,
    maneuver: Maneuver,
    position: SensorPosition,
    trial: u32,
    audio: PathBuf,
) -> ManifestEntry {
    ManifestEntry {
        subject_id: subject.to_string(),
        mask_type: mask,
        maneuver,
        sensor_position: position,
        trial,
        audio_path: audio,
        fvc_l: None,
        fev1_l: None,
        pef_ls: None,
        rr_bpm: None,
        accel_path: None,
        demographics: None,
    }
}

/// Forced maneuvers (and optionally tidal recordings with chest motion) for
/// several subjects, plus the manifest describing them. With `positions`,
/// each recording is listed once per sensor position.
fn dataset(c: &Common, subjects: usize, maneuvers: usize, positions: bool, tidal: bool, mask: MaskType) -> Result<()> {
    if subjects == 0 || maneuvers == 0 {
        return Err(Error::InvalidInput("need at least one subject and one maneuver".into()).into());
    }
    let out = out_dir(c)?;
    let rate = c.rate.unwrap_or(DEFAULT_RATE);
    let audio_dir = out.join("audio");
    std::fs::create_dir_all(&audio_dir).with_context(|| format!("creating {}", audio_dir.display()))?;
    let mut entries = Vec::new();
    for m in synthetic_maneuvers(&SubjectCorpusConfig {
        subjects,
        maneuvers,
        sample_rate_hz: rate,
        seed: c.seed,
    }) {
        let rel_path = PathBuf::from("audio").join(format!("{}_forced_{}.wav", m.subject_id, m.trial));
        save_wav(&synth(&SynthKind::Forced(m.params.clone()))?, &out.join(&rel_path))?;
        let (pef, fev1, fvc) = m.params.truth();
        for &p in &placements(positions) {
            entries.push(ManifestEntry {
                pef_ls: Some(pef),
                fev1_l: Some(fev1),
                fvc_l: Some(fvc),
                ..entry(&m.subject_id, mask, Maneuver::Forced, p, m.trial, rel_path.clone())
            });
        }
    }
    if tidal {
        let accel_dir = out.join("accel");
        std::fs::create_dir_all(&accel_dir).with_context(|| format!("creating {}", accel_dir.display()))?;
        for s in 0..subjects {
            let subject = format!("s{:02}", s + 1);
            for t in 0..maneuvers {
                let stream = (s * 1000 + t) as u64;
                let u = seed::derive_seed(c.seed, 5_000_000 + stream) as f64 / u64::MAX as f64;
                let bpm = 10.0 + 15.0 * u;
                let params = breath(
                    bpm,
                    TIDAL_DURATION_S,
                    rate,
                    seed::derive_seed(c.seed, 3_000_000 + stream),
                );
                let audio = PathBuf::from("audio").join(format!("{subject}_tidal_{t}.wav"));
                let accel = PathBuf::from("accel").join(format!("{subject}_tidal_{t}.csv"));
                save_wav(&synth(&SynthKind::Breath(params.clone()))?, &out.join(&audio))?;
                let trace = chest_motion(&ChestMotionParams {
                    breath: params,
                    seed: seed::derive_seed(c.seed, 4_000_000 + stream),
                    ..Default::default()
                })?;
                save_accel_csv(&trace, &out.join(&accel))?;
                for &p in &placements(positions) {
                    entries.push(ManifestEntry {
                        accel_path: Some(accel.clone()),
                        ..entry(&subject, mask, Maneuver::Tidal, p, t as u32, audio.clone())
                    });
                }
            }
        }
    }
    let manifest_path = out.join(match c.format {
        Format::Json => "manifest.json",
        Format::Csv => "manifest.csv",
    });
    save_manifest(&Manifest::new(entries), &manifest_path)?;
    print_json(&Written {
        files: vec![rel(out, &manifest_path)],
    })
}
