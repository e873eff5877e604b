//! JSON and CSV output. Field order follows struct order and maps are
//! sorted, so identical inputs give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::EvalReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::invalid(format!("unknown format {other:?}"))),
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// One CSV row per item, header from the field names.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectErrorRow {
    pub target: String,
    pub model: String,
    pub subject_id: String,
    pub percent_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlandAltmanRow {
    pub mean: f64,
    pub difference: f64,
}

/// One row per evaluated subject.
pub fn subject_rows(report: &EvalReport) -> Vec<SubjectErrorRow> {
    report
        .per_subject_percent_error
        .iter()
        .map(|(s, e)| SubjectErrorRow {
            target: report.target.as_str().into(),
            model: report.model.as_str().into(),
            subject_id: s.clone(),
            percent_error: *e,
        })
        .collect()
}

pub fn bland_altman_rows(report: &EvalReport) -> Vec<BlandAltmanRow> {
    report
        .bland_altman
        .points
        .iter()
        .map(|&(mean, difference)| BlandAltmanRow { mean, difference })
        .collect()
}

/// Write an evaluation report into `dir`. JSON gives one file with the
/// whole report; CSV gives the per-subject table and the Bland-Altman
/// points. Returns the files written.
pub fn emit_eval_report(report: &EvalReport, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    let stem = format!("eval_{}_{}", report.target.as_str(), report.model.as_str());
    match format {
        ReportFormat::Json => {
            let p = dir.join(format!("{stem}.json"));
            write_text(&p, &to_json(report)?)?;
            Ok(vec![p])
        }
        ReportFormat::Csv => {
            let p = dir.join(format!("{stem}.csv"));
            write_text(&p, &to_csv(&subject_rows(report))?)?;
            let q = dir.join(format!("{stem}_bland_altman.csv"));
            write_text(&q, &to_csv(&bland_altman_rows(report))?)?;
            Ok(vec![p, q])
        }
    }
}

/// Write any flat table as JSON (array) or CSV.
pub fn emit_table<T: Serialize>(rows: &[T], path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Json => to_json(rows)?,
        ReportFormat::Csv => to_csv(rows)?,
    };
    write_text(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureVector, TargetVariant};
    use crate::learn::{loocv, Dataset, Hyper, Row};

    fn report() -> EvalReport {
        let rows = (0..5)
            .flat_map(|s| {
                (0..2).map(move |k| {
                    let x = s as f64 + 0.3 * k as f64;
                    Row {
                        subject_id: format!("s{s}"),
                        row_id: format!("s{s}-{k}"),
                        features: FeatureVector::new(
                            vec!["a".into(), "b".into()],
                            vec![x, (x * 1.7).sin()],
                            TargetVariant::Fvc,
                        )
                        .unwrap(),
                        target: 2.0 + 0.5 * x + 0.1 * (x * 3.0).cos(),
                        tags: Default::default(),
                    }
                })
            })
            .collect();
        let data = Dataset::new(rows, TargetVariant::Fvc).unwrap();
        loocv(&data, &Hyper::Linear, &["a".into(), "b".into()], 7).unwrap()
    }

    #[test]
    fn json_round_trip_is_identical() {
        let r = report();
        let a = to_json(&r).unwrap();
        let back: EvalReport = serde_json::from_str(&a).unwrap();
        assert_eq!(to_json(&back).unwrap(), a);
        assert_eq!(back, r);
    }

    #[test]
    fn csv_has_one_row_per_subject_and_mpe_matches() {
        let r = report();
        let rows = subject_rows(&r);
        assert_eq!(rows.len(), 5);
        let csv = to_csv(&rows).unwrap();
        assert_eq!(csv.lines().count(), 6);
        let mean = rows.iter().map(|r| r.percent_error).sum::<f64>() / rows.len() as f64;
        assert!((mean - r.mpe).abs() < 1e-9);
    }

    #[test]
    fn emit_writes_stable_files() {
        let r = report();
        let d = tempfile::tempdir().unwrap();
        let files = emit_eval_report(&r, d.path(), ReportFormat::Csv).unwrap();
        assert_eq!(files.len(), 2);
        let first = fs::read(&files[0]).unwrap();
        emit_eval_report(&r, d.path(), ReportFormat::Csv).unwrap();
        assert_eq!(fs::read(&files[0]).unwrap(), first);
        let missing = d.path().join("nope");
        assert!(matches!(
            emit_eval_report(&r, &missing, ReportFormat::Json),
            Err(Error::Io { .. })
        ));
    }
}
