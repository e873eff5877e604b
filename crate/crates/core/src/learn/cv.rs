//! Nested leave-one-subject-out evaluation.
//!
//! The outer loop holds out each subject in turn. Inside the remaining
//! subjects, features are optionally chosen by forward selection and the
//! grid entry with the lowest inner-CV MPE is refit on all of them. Inner
//! folds leave one subject out when there are at most 10 subjects and
//! otherwise assign sorted subjects round-robin to 5 folds.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::metrics::{bland_altman, percentage_error, BlandAltman};
use super::select::{grid_cv_mpe, sfs, subject_mpe, SfsConfig};
use super::{fit, Hyper, Kernel, ModelKind, SVR_EPSILON};
use crate::error::{Error, Result};
use crate::features::TargetVariant;

pub const ATS_GATE_PERCENT: f64 = 7.0;
pub const EVAL_SCHEMA_VERSION: &str = "spiro-eval/1";
const LOSO_MAX_SUBJECTS: usize = 10;
const INNER_K: usize = 5;

/// Inner folds as lists of held-out subjects.
pub fn inner_folds(subjects: &[String]) -> Vec<Vec<String>> {
    if subjects.len() <= LOSO_MAX_SUBJECTS {
        return subjects.iter().map(|s| vec![s.clone()]).collect();
    }
    let mut folds = vec![Vec::new(); INNER_K];
    for (i, s) in subjects.iter().enumerate() {
        folds[i % INNER_K].push(s.clone());
    }
    folds
}

/// Tuning grid: forests of 5 to 495 trees in steps of 10; SVR over
/// C in {0.1, 1, 10, 100} and every kernel.
pub fn default_grid(kind: ModelKind) -> Vec<Hyper> {
    match kind {
        ModelKind::Linear => vec![Hyper::Linear],
        ModelKind::RandomForest => (5..=495)
            .step_by(10)
            .map(|trees| Hyper::RandomForest { trees })
            .collect(),
        ModelKind::Svr => [0.1, 1.0, 10.0, 100.0]
            .into_iter()
            .flat_map(|c| {
                Kernel::ALL.into_iter().map(move |kernel| Hyper::Svr {
                    c,
                    kernel,
                    epsilon: SVR_EPSILON,
                })
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FeatureMode {
    /// Use these features in every fold.
    Fixed { features: Vec<String> },
    /// Run forward selection on each outer training fold.
    InFold { sfs: SfsConfig },
    /// Run forward selection once on all subjects before the outer loop.
    /// Leaks the held-out subject into selection; kept for comparison.
    Global { sfs: SfsConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub seed: u64,
    pub features: FeatureMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub subject_id: String,
    pub row_id: String,
    pub truth: f64,
    pub estimate: f64,
    pub percent_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub held_out: String,
    pub trained_subjects: Vec<String>,
    pub hyper: Hyper,
    pub selected_features: Vec<String>,
    /// Inner-CV MPE of the chosen grid entry; absent for a one-entry grid.
    pub inner_mpe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    pub subjects: usize,
    pub rows: usize,
    pub mpe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: String,
    pub target: TargetVariant,
    pub model: ModelKind,
    pub seed: u64,
    pub per_subject_percent_error: BTreeMap<String, f64>,
    pub mpe: f64,
    /// Tag name -> tag value -> stats over rows carrying that value.
    pub groups: BTreeMap<String, BTreeMap<String, GroupStat>>,
    pub bland_altman: BlandAltman,
    pub predictions: Vec<Prediction>,
    pub folds: Vec<FoldRecord>,
    pub excluded_subjects: Vec<String>,
    /// MPE above the 7 % repeatability gate.
    pub ats_gate_exceeded: bool,
}

fn outer_fold(
    data: &Dataset,
    held: &str,
    grid: &[Hyper],
    mode: &FeatureMode,
    global: Option<&[String]>,
    seed: u64,
) -> Result<(FoldRecord, Vec<Prediction>)> {
    let train = data.filter_subjects(|s| s != held);
    let test = data.filter_subjects(|s| s == held);
    let features = match (mode, global) {
        (FeatureMode::Fixed { features }, _) => features.clone(),
        (FeatureMode::InFold { sfs: cfg }, _) => sfs(&train, cfg, seed)?.selected,
        (FeatureMode::Global { .. }, Some(g)) => g.to_vec(),
        (FeatureMode::Global { .. }, None) => unreachable!(),
    };
    if features.is_empty() {
        return Err(Error::InvalidDataset(format!(
            "no feature improves on the mean predictor without subject {held:?}"
        )));
    }
    let (hyper, inner_mpe) = select_hyper(&train, grid, &features, seed)?;
    let model = fit(&train, &hyper, &features, seed)?;
    let predictions = test
        .rows()
        .iter()
        .map(|r| {
            let estimate = model.predict(&r.features)?;
            Ok(Prediction {
                subject_id: r.subject_id.clone(),
                row_id: r.row_id.clone(),
                truth: r.target,
                estimate,
                percent_error: percentage_error(r.target, estimate)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let record = FoldRecord {
        held_out: held.to_string(),
        trained_subjects: model.trained_subjects.clone(),
        hyper,
        selected_features: features,
        inner_mpe,
    };
    Ok((record, predictions))
}

/// Grid entry with the lowest inner-CV MPE (first on ties) and that MPE.
/// A one-entry grid is returned without scoring.
pub fn select_hyper(data: &Dataset, grid: &[Hyper], features: &[String], seed: u64) -> Result<(Hyper, Option<f64>)> {
    match grid {
        [] => Err(Error::invalid("empty hyperparameter grid")),
        [only] => Ok((*only, None)),
        _ => {
            let scores = grid_cv_mpe(data, grid, features, seed)?;
            let mut k = 0;
            for (i, s) in scores.iter().enumerate() {
                if *s < scores[k] {
                    k = i;
                }
            }
            Ok((grid[k], Some(scores[k])))
        }
    }
}

/// Nested leave-one-subject-out evaluation over `grid`, whose entries must
/// share one model kind.
pub fn nested_loocv(data: &Dataset, grid: &[Hyper], cfg: &EvalConfig) -> Result<EvalReport> {
    let Some(first) = grid.first() else {
        return Err(Error::invalid("empty hyperparameter grid"));
    };
    if grid.iter().any(|h| h.kind() != first.kind()) {
        return Err(Error::invalid("grid mixes model kinds"));
    }
    let subjects = data.subjects();
    if subjects.len() < 3 {
        return Err(Error::InvalidDataset(format!(
            "nested LOOCV needs at least 3 subjects, got {}",
            subjects.len()
        )));
    }
    let global = match &cfg.features {
        FeatureMode::Global { sfs: s } => Some(sfs(data, s, cfg.seed)?.selected),
        _ => None,
    };
    let outcomes = subjects
        .par_iter()
        .map(|s| outer_fold(data, s, grid, &cfg.features, global.as_deref(), cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut folds = Vec::new();
    let mut predictions = Vec::new();
    for (f, p) in outcomes {
        folds.push(f);
        predictions.extend(p);
    }
    build_report(data, first.kind(), cfg.seed, folds, predictions)
}

/// Plain leave-one-subject-out with fixed hyperparameters and features.
pub fn loocv(data: &Dataset, hyper: &Hyper, features: &[String], seed: u64) -> Result<EvalReport> {
    nested_loocv(
        data,
        std::slice::from_ref(hyper),
        &EvalConfig {
            seed,
            features: FeatureMode::Fixed {
                features: features.to_vec(),
            },
        },
    )
}

fn build_report(
    data: &Dataset,
    model: ModelKind,
    seed: u64,
    folds: Vec<FoldRecord>,
    predictions: Vec<Prediction>,
) -> Result<EvalReport> {
    let rows: Vec<(&str, f64, f64)> = predictions
        .iter()
        .map(|p| (p.subject_id.as_str(), p.truth, p.estimate))
        .collect();
    let (per_subject, mpe) = subject_mpe(&rows)?;

    let by_id: BTreeMap<&str, &Prediction> = predictions.iter().map(|p| (p.row_id.as_str(), p)).collect();
    let mut tagged: BTreeMap<String, BTreeMap<String, Vec<(&str, f64, f64)>>> = BTreeMap::new();
    for r in data.rows() {
        let p = by_id[r.row_id.as_str()];
        for (k, v) in &r.tags {
            tagged
                .entry(k.clone())
                .or_default()
                .entry(v.clone())
                .or_default()
                .push((p.subject_id.as_str(), p.truth, p.estimate));
        }
    }
    let mut groups = BTreeMap::new();
    for (k, values) in tagged {
        let mut stats = BTreeMap::new();
        for (v, rows) in values {
            let (per, mpe) = subject_mpe(&rows)?;
            stats.insert(
                v,
                GroupStat {
                    subjects: per.len(),
                    rows: rows.len(),
                    mpe,
                },
            );
        }
        groups.insert(k, stats);
    }

    let pairs: Vec<(f64, f64)> = predictions.iter().map(|p| (p.truth, p.estimate)).collect();
    let excluded: BTreeSet<&String> = data.excluded().iter().collect();
    Ok(EvalReport {
        schema_version: EVAL_SCHEMA_VERSION.to_string(),
        target: data.target_kind(),
        model,
        seed,
        per_subject_percent_error: per_subject,
        mpe,
        groups,
        bland_altman: bland_altman(&pairs)?,
        predictions,
        folds,
        excluded_subjects: excluded.into_iter().cloned().collect(),
        ats_gate_exceeded: mpe > ATS_GATE_PERCENT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::tests::dataset;

    #[test]
    fn fold_rule() {
        let few: Vec<String> = (0..10).map(|i| format!("s{i:02}")).collect();
        assert_eq!(inner_folds(&few).len(), 10);
        let many: Vec<String> = (0..12).map(|i| format!("s{i:02}")).collect();
        let f = inner_folds(&many);
        assert_eq!(f.len(), 5);
        assert_eq!(f[0], ["s00", "s05", "s10"]);
    }

    #[test]
    fn grid_shapes() {
        let rf = default_grid(ModelKind::RandomForest);
        assert_eq!(rf.len(), 50);
        assert_eq!(rf[0], Hyper::RandomForest { trees: 5 });
        assert_eq!(rf[49], Hyper::RandomForest { trees: 495 });
        assert_eq!(default_grid(ModelKind::Svr).len(), 12);
    }

    #[test]
    fn constant_target_zero_mpe() {
        let rows: Vec<(&str, Vec<f64>, f64)> = (0..9)
            .map(|i| (["a", "b", "c"][i % 3], vec![i as f64, (i % 2) as f64], 2.0))
            .collect();
        let d = dataset(&rows);
        for kind in ModelKind::ALL {
            let r = nested_loocv(
                &d,
                &default_grid(kind)[..3.min(default_grid(kind).len())],
                &EvalConfig {
                    seed: 0,
                    features: FeatureMode::Fixed {
                        features: d.names().to_vec(),
                    },
                },
            )
            .unwrap();
            assert!(r.mpe < 1e-6, "{kind:?} {}", r.mpe);
            assert_eq!(r.per_subject_percent_error.len(), 3);
        }
    }

    #[test]
    fn held_out_never_trained() {
        let rows: Vec<(&str, Vec<f64>, f64)> = (0..20)
            .map(|i| {
                (
                    ["a", "b", "c", "d"][i % 4],
                    vec![i as f64, (i * 7 % 5) as f64],
                    1.0 + i as f64 * 0.1,
                )
            })
            .collect();
        let d = dataset(&rows);
        let r = nested_loocv(
            &d,
            &default_grid(ModelKind::RandomForest)[..4],
            &EvalConfig {
                seed: 2,
                features: FeatureMode::InFold {
                    sfs: SfsConfig::default(),
                },
            },
        )
        .unwrap();
        for f in &r.folds {
            assert!(!f.trained_subjects.contains(&f.held_out));
            assert_eq!(f.trained_subjects.len(), 3);
        }
        let mean = r.per_subject_percent_error.values().sum::<f64>() / 4.0;
        assert!((mean - r.mpe).abs() < 1e-12);
    }

    #[test]
    fn one_entry_grid_is_plain_loocv() {
        let rows: Vec<(&str, Vec<f64>, f64)> = (0..15)
            .map(|i| {
                (
                    ["a", "b", "c", "d", "e"][i % 5],
                    vec![i as f64, (i % 4) as f64],
                    2.0 + (i % 3) as f64,
                )
            })
            .collect();
        let d = dataset(&rows);
        let h = Hyper::RandomForest { trees: 25 };
        let plain = loocv(&d, &h, d.names(), 8).unwrap();
        let nested = nested_loocv(
            &d,
            &[h],
            &EvalConfig {
                seed: 8,
                features: FeatureMode::Fixed {
                    features: d.names().to_vec(),
                },
            },
        )
        .unwrap();
        assert_eq!(
            serde_json::to_string(&plain).unwrap(),
            serde_json::to_string(&nested).unwrap()
        );
    }
}
