use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::Result;
use serde::Serialize;
use spiro_core::features::{assemble_from_curves, FeatureSchema, TargetVariant};
use spiro_core::flow::{save_curve_csv, ShapeVerdict};
use spiro_core::forced::maneuver_curves;
use spiro_core::io::{self, emit_eval_report, forced_datasets, load_manifest, write_text, ManifestEntry};
use spiro_core::learn::{
    default_grid, fit, nested_loocv, select_hyper, sfs, Dataset, EvalConfig, FeatureMode, Hyper, ModelKind, SfsConfig,
    TrainedEstimator,
};
use spiro_core::Error;

use crate::args::{Common, ForcedCmd, ModelArgs};
use crate::{out_dir, print_json, require};

pub fn run(c: &Common, cmd: &ForcedCmd) -> Result<()> {
    match cmd {
        ForcedCmd::Analyze => analyze(c),
        ForcedCmd::Train(a) => train(c, a),
        ForcedCmd::Eval { model, global_sfs } => eval(c, model, *global_sfs),
    }
}

pub(crate) fn targets(t: &Option<String>) -> Result<Vec<TargetVariant>> {
    match t {
        None => Ok(TargetVariant::LUNG.to_vec()),
        Some(s) => {
            let t = TargetVariant::parse(s)?;
            if t == TargetVariant::Generic {
                return Err(Error::InvalidInput("target must be pef, fev1 or fvc".into()).into());
            }
            Ok(vec![t])
        }
    }
}

pub(crate) fn sfs_config(a: &ModelArgs) -> SfsConfig {
    SfsConfig {
        max_features: a.max_features,
        ..Default::default()
    }
}

/// Forced datasets for the requested targets from `--manifest`.
pub(crate) fn manifest_datasets(c: &Common, a: &ModelArgs) -> Result<(Vec<Dataset>, Vec<ManifestEntry>)> {
    let manifest = load_manifest(require(&c.manifest, "manifest")?)?;
    let entries: Vec<&ManifestEntry> = manifest.forced().collect();
    if entries.is_empty() {
        return Err(Error::InvalidDataset("manifest has no forced entries".into()).into());
    }
    let sets = forced_datasets(&entries, &targets(&a.target)?, &FeatureSchema::default())?;
    let owned = entries.into_iter().cloned().collect();
    Ok((sets, owned))
}

/// Forward-selected features and the best grid entry, then a fit on all
/// of `data`.
pub(crate) fn train_one(
    data: &Dataset,
    kind: ModelKind,
    a: &ModelArgs,
    seed: u64,
) -> Result<(TrainedEstimator, Option<f64>)> {
    let selected = sfs(data, &sfs_config(a), seed)?.selected;
    if selected.is_empty() {
        return Err(Error::InvalidDataset("no feature improves on the mean predictor".into()).into());
    }
    let (hyper, inner) = select_hyper(data, &default_grid(kind), &selected, seed)?;
    Ok((fit(data, &hyper, &selected, seed)?, inner))
}

fn model_path(dir: &Path, t: TargetVariant) -> std::path::PathBuf {
    dir.join(format!("model_{}.json", t.as_str()))
}

#[derive(Serialize)]
struct AnalyzeReport {
    source: String,
    sample_rate_hz: u32,
    onset_s: f64,
    pef_ls: f64,
    fev1_l: f64,
    fvc_l: f64,
    shape_verdict: ShapeVerdict,
    fv_curve: String,
}

fn analyze(c: &Common) -> Result<()> {
    let rec = io::load_wav(require(&c.input, "input")?)?;
    let model_dir = require(&c.model, "model")?;
    let curves = maneuver_curves(&rec)?;
    if !curves.verdict.accepted {
        return Err(Error::RejectedManeuver(curves.verdict.reasons.clone()).into());
    }
    let mut est = BTreeMap::new();
    for t in TargetVariant::LUNG {
        let path = model_path(model_dir, t);
        let text = fs::read_to_string(&path).map_err(|e| Error::Io { path, source: e })?;
        let model = TrainedEstimator::from_json(&text)?;
        if model.target != t {
            return Err(Error::SchemaError(format!(
                "model for {} found in the {} slot",
                model.target.as_str(),
                t.as_str()
            ))
            .into());
        }
        let fv = assemble_from_curves(&curves, t, &FeatureSchema::default())?;
        est.insert(t, model.predict(&fv)?);
    }
    let out = out_dir(c)?;
    save_curve_csv(&curves.flow, &out.join("fv_curve.csv"))?;
    let report = AnalyzeReport {
        source: rec.source_id().to_string(),
        sample_rate_hz: rec.sample_rate_hz(),
        onset_s: curves.onset as f64 / rec.sample_rate_hz() as f64,
        pef_ls: est[&TargetVariant::Pef],
        fev1_l: est[&TargetVariant::Fev1],
        fvc_l: est[&TargetVariant::Fvc],
        shape_verdict: curves.verdict.clone(),
        fv_curve: "fv_curve.csv".into(),
    };
    write_text(&out.join("analyze.json"), &io::to_json(&report)?)?;
    print_json(&report)
}

#[derive(Serialize)]
struct TrainSummary {
    target: TargetVariant,
    hyper: Hyper,
    selected_features: Vec<String>,
    inner_mpe: Option<f64>,
    subjects: usize,
    rows: usize,
    excluded_subjects: Vec<String>,
    model_file: String,
}

fn train(c: &Common, a: &ModelArgs) -> Result<()> {
    let kind = ModelKind::parse(&a.kind)?;
    let (sets, _) = manifest_datasets(c, a)?;
    let out = out_dir(c)?;
    let mut summary = Vec::new();
    for data in &sets {
        let (model, inner_mpe) = train_one(data, kind, a, c.seed)?;
        let path = model_path(out, data.target_kind());
        write_text(&path, &model.to_json()?)?;
        summary.push(TrainSummary {
            target: data.target_kind(),
            hyper: model.hyper,
            selected_features: model.selected_features.clone(),
            inner_mpe,
            subjects: data.subjects().len(),
            rows: data.len(),
            excluded_subjects: data.excluded().iter().cloned().collect(),
            model_file: path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
        });
    }
    write_text(&out.join("train_summary.json"), &io::to_json(&summary)?)?;
    print_json(&summary)
}

#[derive(Serialize)]
struct EvalSummary {
    target: TargetVariant,
    model: ModelKind,
    seed: u64,
    subjects: usize,
    mpe: f64,
    ats_gate_exceeded: bool,
    excluded_subjects: Vec<String>,
    files: Vec<String>,
}

fn eval(c: &Common, a: &ModelArgs, global_sfs: bool) -> Result<()> {
    let kind = ModelKind::parse(&a.kind)?;
    let (sets, _) = manifest_datasets(c, a)?;
    let out = out_dir(c)?;
    let features = if global_sfs {
        FeatureMode::Global { sfs: sfs_config(a) }
    } else {
        FeatureMode::InFold { sfs: sfs_config(a) }
    };
    let cfg = EvalConfig { seed: c.seed, features };
    let mut summary = Vec::new();
    for data in &sets {
        let report = nested_loocv(data, &default_grid(kind), &cfg)?;
        let files = emit_eval_report(&report, out, c.format.into())?;
        summary.push(EvalSummary {
            target: report.target,
            model: report.model,
            seed: report.seed,
            subjects: report.per_subject_percent_error.len(),
            mpe: report.mpe,
            ats_gate_exceeded: report.ats_gate_exceeded,
            excluded_subjects: report.excluded_subjects.clone(),
            files: files
                .iter()
                .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
                .collect(),
        });
    }
    write_text(&out.join("eval_summary.json"), &io::to_json(&summary)?)?;
    print_json(&summary)
}
