//! Sensor-position breakdown: for each held-out subject, fit on the L1
//! maneuvers of every other subject and predict the held-out subject at
//! each position.

use std::collections::{BTreeMap, BTreeSet};

use anyhow::Result;
use serde::Serialize;
use spiro_core::io::{self, emit_table, load_manifest, ManifestEntry, SensorPosition};
use spiro_core::learn::{percentage_error, ModelKind, ATS_GATE_PERCENT};
use spiro_core::Error;

use crate::args::{Common, ModelArgs};
use crate::forced::{targets, train_one};
use crate::tidal::{load_cnn, mae, rate_record, rate_truth};
use crate::{out_dir, print_json, require};

const TRAIN_POSITION: SensorPosition = SensorPosition::L1;

#[derive(Debug, Clone, Serialize)]
struct PositionRow {
    maneuver: String,
    target: String,
    position: String,
    subjects: usize,
    rows: usize,
    /// MPE (%) for forced targets, MAE (bpm) for respiration rate.
    error: f64,
    /// Forced MPE above the 7 % gate.
    flagged: bool,
}

#[derive(Serialize)]
struct PositionReport {
    model: ModelKind,
    seed: u64,
    train_position: String,
    missing_positions: Vec<String>,
    rows: Vec<PositionRow>,
}

fn position_of(tags: &BTreeMap<String, String>) -> &str {
    tags.get("position").map(String::as_str).unwrap_or("unknown")
}

fn forced_rows(c: &Common, a: &ModelArgs, kind: ModelKind, entries: &[&ManifestEntry]) -> Result<Vec<PositionRow>> {
    let sets = io::forced_datasets(entries, &targets(&a.target)?, &Default::default())?;
    let mut out = Vec::new();
    for data in &sets {
        let subjects = data.subjects();
        // position -> subject -> percent errors
        let mut errs: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
        for held in &subjects {
            let train = data.filter_rows(|r| &r.subject_id != held && position_of(&r.tags) == TRAIN_POSITION.as_str());
            if train.subjects().len() < 2 {
                return Err(Error::InvalidDataset(format!(
                    "holding out {held} leaves fewer than 2 subjects with {TRAIN_POSITION} maneuvers"
                ))
                .into());
            }
            let (model, _) = train_one(&train, kind, a, c.seed)?;
            for r in data.rows().iter().filter(|r| &r.subject_id == held) {
                let pe = percentage_error(r.target, model.predict(&r.features)?)?;
                errs.entry(position_of(&r.tags).to_string())
                    .or_default()
                    .entry(held.clone())
                    .or_default()
                    .push(pe);
            }
        }
        for (position, per_subject) in errs {
            let means: Vec<f64> = per_subject
                .values()
                .map(|v| v.iter().sum::<f64>() / v.len() as f64)
                .collect();
            let mpe = means.iter().sum::<f64>() / means.len() as f64;
            out.push(PositionRow {
                maneuver: "forced".into(),
                target: data.target_kind().as_str().into(),
                position,
                subjects: per_subject.len(),
                rows: per_subject.values().map(Vec::len).sum(),
                error: mpe,
                flagged: mpe > ATS_GATE_PERCENT,
            });
        }
    }
    Ok(out)
}

fn tidal_rows(c: &Common, entries: &[&ManifestEntry]) -> Result<Vec<PositionRow>> {
    let model = c.model.as_deref().map(load_cnn).transpose()?;
    let mut errs: BTreeMap<String, (BTreeSet<String>, usize, Vec<f64>)> = BTreeMap::new();
    for e in entries {
        let slot = errs.entry(e.sensor_position.as_str().to_string()).or_default();
        slot.0.insert(e.subject_id.clone());
        slot.1 += 1;
        let Some(truth) = rate_truth(e)? else { continue };
        let rec = io::load_wav(&e.audio_path)?;
        if let Some(bpm) = rate_record(model.as_ref(), &rec, true)?.rate_bpm {
            slot.2.push((bpm - truth).abs());
        }
    }
    Ok(errs
        .into_iter()
        .filter_map(|(position, (subjects, rows, e))| {
            mae(&e).map(|error| PositionRow {
                maneuver: "tidal".into(),
                target: "rr".into(),
                position,
                subjects: subjects.len(),
                rows,
                error,
                flagged: false,
            })
        })
        .collect())
}

pub fn run(c: &Common, a: &ModelArgs) -> Result<()> {
    let kind = ModelKind::parse(&a.kind)?;
    let manifest = load_manifest(require(&c.manifest, "manifest")?)?;
    let present: BTreeSet<SensorPosition> = manifest.entries.iter().map(|e| e.sensor_position).collect();
    if !present.contains(&TRAIN_POSITION) {
        return Err(Error::InvalidDataset(format!("no {TRAIN_POSITION} entries to train on")).into());
    }
    let missing: Vec<String> = SensorPosition::ALL
        .iter()
        .filter(|p| **p != SensorPosition::Unknown && !present.contains(p))
        .map(|p| p.as_str().to_string())
        .collect();
    for p in &missing {
        eprintln!("warning: no entries at position {p}; skipped");
    }
    let forced: Vec<&ManifestEntry> = manifest.forced().collect();
    let tidal: Vec<&ManifestEntry> = manifest.tidal().collect();
    let mut rows = Vec::new();
    if !forced.is_empty() {
        rows.extend(forced_rows(c, a, kind, &forced)?);
    }
    if !tidal.is_empty() {
        rows.extend(tidal_rows(c, &tidal)?);
    }
    let out = out_dir(c)?;
    emit_table(
        &rows,
        &out.join(format!("positions.{}", io::ReportFormat::from(c.format).extension())),
        c.format.into(),
    )?;
    let report = PositionReport {
        model: kind,
        seed: c.seed,
        train_position: TRAIN_POSITION.as_str().into(),
        missing_positions: missing,
        rows,
    };
    print_json(&report)
}
