use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::Result;
use serde::Serialize;
use spiro_core::io::{
    self, accel_rr_with, emit_table, load_accel_csv, load_manifest, write_text, AccelConfig, ManifestEntry,
};
use spiro_core::signal::AudioRecording;
use spiro_core::tidal::{
    classify, cross_validate, featurize, respiration_rate, sampling_rate_study, synthetic_corpus, train_on_corpus,
    tune_windows, window_grid, CnnConfig, CnnModel, CorpusConfig, CvOptions, CvResult, TidalClass, TuneRow, VotedLabel,
    WindowConfig, STUDY_RATES_HZ,
};
use spiro_core::Error;

use crate::args::{Common, CorpusArgs, TidalCmd};
use crate::exit::NotTidal;
use crate::{out_dir, print_json, require};

pub fn run(c: &Common, cmd: &TidalCmd) -> Result<()> {
    match cmd {
        TidalCmd::Classify => classify_one(c),
        TidalCmd::Rate { force } => rate(c, *force),
        TidalCmd::Train { corpus, tune } => train(c, corpus, *tune),
        TidalCmd::Study { corpus } => study(c, corpus),
    }
}

pub(crate) fn load_cnn(path: &Path) -> Result<CnnModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(CnnModel::from_json(&text)?)
}

fn classify_one(c: &Common) -> Result<()> {
    let model = load_cnn(require(&c.model, "model")?)?;
    let rec = io::load_wav(require(&c.input, "input")?)?;
    let decision = classify(&model, &rec)?;
    write_text(&out_dir(c)?.join("classify.json"), &io::to_json(&decision)?)?;
    print_json(&decision)
}

#[derive(Debug, Clone, Serialize)]
pub(crate) struct RateRecord {
    pub source: String,
    /// Voted class, absent when no classifier was given.
    pub label: Option<VotedLabel>,
    pub vote_fraction: Option<f64>,
    pub rate_bpm: Option<f64>,
    pub rejected: bool,
}

/// Classify (when a model is given), then estimate the rate. Without
/// `force`, an uncertain or non-tidal vote is an error.
pub(crate) fn rate_record(model: Option<&CnnModel>, rec: &AudioRecording, force: bool) -> Result<RateRecord> {
    let (label, vote_fraction) = match model {
        Some(m) => {
            let d = classify(m, rec)?;
            (Some(d.voted_label), Some(d.vote_fraction))
        }
        None if force => (None, None),
        None => {
            return Err(Error::InvalidInput("--model is required unless --force is given".into()).into());
        }
    };
    if !force {
        match label {
            Some(VotedLabel::Tidal) | None => {}
            Some(VotedLabel::Uncertain) => return Err(Error::UncertainInput.into()),
            Some(l) => {
                return Err(NotTidal {
                    source: rec.source_id().to_string(),
                    label: l.to_string(),
                }
                .into())
            }
        }
    }
    let r = respiration_rate(rec)?;
    Ok(RateRecord {
        source: r.source,
        label,
        vote_fraction,
        rate_bpm: r.rate_bpm,
        rejected: r.rejected,
    })
}

#[derive(Serialize)]
struct ManifestRateRow {
    key: String,
    subject_id: String,
    mask_type: String,
    position: String,
    truth_bpm: Option<f64>,
    label: Option<VotedLabel>,
    rate_bpm: Option<f64>,
    abs_error_bpm: Option<f64>,
    rejected: bool,
    /// Why no rate was produced, when the entry was refused.
    refused: Option<String>,
}

#[derive(Serialize)]
struct GroupMae {
    entries: usize,
    scored: usize,
    mae_bpm: Option<f64>,
}

#[derive(Serialize)]
struct ManifestRateReport {
    overall: GroupMae,
    by_mask: BTreeMap<String, GroupMae>,
    rows: Vec<ManifestRateRow>,
}

/// Manifest rate truth: the stated `rr_bpm`, else the accelerometer rate.
pub(crate) fn rate_truth(e: &ManifestEntry) -> Result<Option<f64>> {
    if let Some(rr) = e.rr_bpm {
        return Ok(Some(rr));
    }
    match &e.accel_path {
        Some(p) => Ok(accel_rr_with(&load_accel_csv(p)?, &AccelConfig::default(), &e.key())?.rate_bpm),
        None => Ok(None),
    }
}

pub(crate) fn mae(errors: &[f64]) -> Option<f64> {
    (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64)
}

fn group(rows: &[&ManifestRateRow]) -> GroupMae {
    let errors: Vec<f64> = rows.iter().filter_map(|r| r.abs_error_bpm).collect();
    GroupMae {
        entries: rows.len(),
        scored: errors.len(),
        mae_bpm: mae(&errors),
    }
}

fn rate(c: &Common, force: bool) -> Result<()> {
    let model = c.model.as_deref().map(load_cnn).transpose()?;
    if let Some(input) = &c.input {
        let rec = io::load_wav(input)?;
        let record = rate_record(model.as_ref(), &rec, force)?;
        write_text(&out_dir(c)?.join("rate.json"), &io::to_json(&record)?)?;
        return print_json(&record);
    }
    let manifest = load_manifest(require(&c.manifest, "manifest or --input")?)?;
    if model.is_none() && !force {
        return Err(Error::InvalidInput("--model is required unless --force is given".into()).into());
    }
    let mut rows = Vec::new();
    for e in manifest.tidal() {
        let truth = rate_truth(e)?;
        let rec = io::load_wav(&e.audio_path)?;
        let (record, refused) = match rate_record(model.as_ref(), &rec, force) {
            Ok(r) => (Some(r), None),
            Err(err)
                if crate::exit::exit_code(&err) == crate::exit::NOT_TIDAL
                    || crate::exit::exit_code(&err) == crate::exit::SIGNAL =>
            {
                (None, Some(format!("{err:#}")))
            }
            Err(err) => return Err(err),
        };
        let rate_bpm = record.as_ref().and_then(|r| r.rate_bpm);
        rows.push(ManifestRateRow {
            key: e.key(),
            subject_id: e.subject_id.clone(),
            mask_type: e.mask_type.as_str().into(),
            position: e.sensor_position.as_str().into(),
            truth_bpm: truth,
            label: record.as_ref().and_then(|r| r.label),
            rate_bpm,
            abs_error_bpm: rate_bpm.zip(truth).map(|(r, t)| (r - t).abs()),
            rejected: record.as_ref().is_none_or(|r| r.rejected),
            refused,
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidDataset("manifest has no tidal entries".into()).into());
    }
    let all: Vec<&ManifestRateRow> = rows.iter().collect();
    let mut masks: BTreeMap<String, Vec<&ManifestRateRow>> = BTreeMap::new();
    for r in &rows {
        masks.entry(r.mask_type.clone()).or_default().push(r);
    }
    let report = ManifestRateReport {
        overall: group(&all),
        by_mask: masks.iter().map(|(k, v)| (k.clone(), group(v))).collect(),
        rows,
    };
    let out = out_dir(c)?;
    write_text(&out.join("rate.json"), &io::to_json(&report)?)?;
    if c.format == crate::args::Format::Csv {
        emit_table(&report.rows, &out.join("rate.csv"), c.format.into())?;
    }
    print_json(&report)
}

fn corpus(c: &Common, a: &CorpusArgs) -> Result<Vec<spiro_core::tidal::LabeledRecording>> {
    Ok(synthetic_corpus(&CorpusConfig {
        per_class: a.per_class,
        sample_rate_hz: c.rate.unwrap_or(16000),
        seed: c.seed,
        ..Default::default()
    })?)
}

fn cnn_config(a: &CorpusArgs) -> CnnConfig {
    CnnConfig {
        epochs: a.epochs,
        ..Default::default()
    }
}

#[derive(Serialize)]
struct TrainSummary {
    window: WindowConfig,
    sample_rate_hz: u32,
    recordings: usize,
    cv: CvResult,
    tuning: Option<Vec<TuneRow>>,
    model_file: String,
}

fn train(c: &Common, a: &CorpusArgs, tune: bool) -> Result<()> {
    let corpus = corpus(c, a)?;
    let cfg = cnn_config(a);
    let opts = CvOptions {
        seed: c.seed,
        ..Default::default()
    };
    let (window, tuning) = if tune {
        let (w, rows) = tune_windows(&corpus, &window_grid(), &cfg, &opts)?;
        (w, Some(rows))
    } else {
        (WindowConfig::default(), None)
    };
    let labels: Vec<TidalClass> = corpus.iter().map(|r| r.label).collect();
    let cv = cross_validate(&featurize(&corpus, &window)?, &labels, &window, &cfg, &opts)?;
    let model = train_on_corpus(&corpus, &window, &cfg, c.seed)?;
    let out = out_dir(c)?;
    write_text(&out.join("cnn.json"), &model.to_json()?)?;
    let summary = TrainSummary {
        window,
        sample_rate_hz: model.sample_rate_hz,
        recordings: corpus.len(),
        cv,
        tuning,
        model_file: "cnn.json".into(),
    };
    write_text(&out.join("train_summary.json"), &io::to_json(&summary)?)?;
    print_json(&summary)
}

fn study(c: &Common, a: &CorpusArgs) -> Result<()> {
    let corpus = corpus(c, a)?;
    let opts = CvOptions {
        seed: c.seed,
        ..Default::default()
    };
    let rows = sampling_rate_study(
        &corpus,
        &STUDY_RATES_HZ,
        &WindowConfig::default(),
        &cnn_config(a),
        &opts,
    )?;
    let out = out_dir(c)?;
    write_text(&out.join("study.json"), &io::to_json(&rows)?)?;
    emit_table(&rows, &out.join("study.csv"), io::ReportFormat::Csv)?;
    print_json(&rows)
}
