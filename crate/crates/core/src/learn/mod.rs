//! Regression of lung parameters from feature vectors: least squares,
//! random forest and SVR estimators, forward feature selection and nested
//! leave-one-subject-out evaluation.

mod cv;
mod dataset;
mod forest;
mod linear;
mod metrics;
mod select;
mod svr;

pub use cv::{
    default_grid, inner_folds, loocv, nested_loocv, select_hyper, EvalConfig, EvalReport, FeatureMode, FoldRecord,
    GroupStat, Prediction, ATS_GATE_PERCENT, EVAL_SCHEMA_VERSION,
};
pub use dataset::{Dataset, Row};
pub use forest::{Forest, Node, Tree};
pub use linear::LinearModel;
pub use metrics::{bland_altman, percentage_error, BlandAltman};
pub use select::{cv_mpe, grid_cv_mpe, sfs, SfsConfig, SfsResult, SFS_TOLERANCE};
pub use svr::{Kernel, SvrModel, POLY_COEF0, POLY_DEGREE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, TargetVariant};

pub const MODEL_VERSION: &str = "spiro-model/1";
pub const SVR_EPSILON: f64 = 0.1;
/// Lower bound applied to lung-parameter predictions.
pub const MIN_PREDICTION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    RandomForest,
    Svr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Linear, ModelKind::RandomForest, ModelKind::Svr];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Svr => "svr",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(ModelKind::Linear),
            "rf" | "random_forest" | "forest" => Ok(ModelKind::RandomForest),
            "svr" => Ok(ModelKind::Svr),
            other => Err(Error::invalid(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Model kind plus its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hyper {
    Linear,
    RandomForest { trees: usize },
    Svr { c: f64, kernel: Kernel, epsilon: f64 },
}

impl Hyper {
    pub fn kind(&self) -> ModelKind {
        match self {
            Hyper::Linear => ModelKind::Linear,
            Hyper::RandomForest { .. } => ModelKind::RandomForest,
            Hyper::Svr { .. } => ModelKind::Svr,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Hyper::RandomForest { trees } if trees == 0 => Err(Error::invalid("forest needs at least one tree")),
            Hyper::Svr { c, epsilon, .. } if !(c > 0.0 && epsilon >= 0.0) => {
                Err(Error::invalid("SVR needs C > 0 and epsilon >= 0"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ModelState {
    Linear(LinearModel),
    RandomForest(Forest),
    Svr(SvrModel),
}

impl ModelState {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            ModelState::Linear(m) => m.predict(x),
            ModelState::RandomForest(m) => m.predict(x),
            ModelState::Svr(m) => m.predict(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedEstimator {
    pub version: String,
    pub target: TargetVariant,
    pub hyper: Hyper,
    /// Full feature schema the model expects as input.
    pub schema: Vec<String>,
    pub selected_features: Vec<String>,
    pub state: ModelState,
    pub train_seed: u64,
    pub trained_subjects: Vec<String>,
}

fn fit_state(x: &[Vec<f64>], y: &[f64], hyper: &Hyper, seed: u64) -> ModelState {
    match *hyper {
        Hyper::Linear => ModelState::Linear(LinearModel::fit(x, y)),
        Hyper::RandomForest { trees } => ModelState::RandomForest(Forest::fit(x, y, trees, seed)),
        Hyper::Svr { c, kernel, epsilon } => ModelState::Svr(SvrModel::fit(x, y, c, kernel, epsilon)),
    }
}

/// Fit `hyper` on the `features` columns of `data`.
pub fn fit(data: &Dataset, hyper: &Hyper, features: &[String], seed: u64) -> Result<TrainedEstimator> {
    hyper.validate()?;
    let subjects = data.subjects();
    if subjects.len() < 2 {
        return Err(Error::InvalidDataset(format!(
            "training needs at least 2 subjects, got {}",
            subjects.len()
        )));
    }
    if features.is_empty() {
        return Err(Error::invalid("no features selected"));
    }
    let cols = data.columns(features)?;
    let x = data.matrix(&cols);
    let y = data.targets();
    Ok(TrainedEstimator {
        version: MODEL_VERSION.to_string(),
        target: data.target_kind(),
        hyper: *hyper,
        schema: data.names().to_vec(),
        selected_features: features.to_vec(),
        state: fit_state(&x, &y, hyper, seed),
        train_seed: seed,
        trained_subjects: subjects,
    })
}

impl TrainedEstimator {
    fn select(&self, fv: &FeatureVector) -> Result<Vec<f64>> {
        if fv.names() != self.schema.as_slice() {
            return Err(Error::SchemaError(format!(
                "model expects {} features of its training schema, got {}",
                self.schema.len(),
                fv.len()
            )));
        }
        self.selected_features
            .iter()
            .map(|f| {
                fv.get(f)
                    .ok_or_else(|| Error::SchemaError(format!("missing feature {f:?}")))
            })
            .collect()
    }

    fn clamp(&self, v: f64) -> f64 {
        if self.target == TargetVariant::Generic {
            v
        } else {
            v.max(MIN_PREDICTION)
        }
    }

    pub fn predict(&self, fv: &FeatureVector) -> Result<f64> {
        let x = self.select(fv)?;
        Ok(self.clamp(self.state.predict(&x)))
    }

    /// Individual tree outputs of a forest model (unclamped).
    pub fn tree_predictions(&self, fv: &FeatureVector) -> Result<Vec<f64>> {
        let x = self.select(fv)?;
        match &self.state {
            ModelState::RandomForest(f) => Ok(f.tree_predictions(&x)),
            _ => Err(Error::invalid("not a random forest")),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.version != MODEL_VERSION {
            return Err(Error::SchemaError(format!(
                "model version {:?}, expected {MODEL_VERSION:?}",
                m.version
            )));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    pub(crate) fn dataset(rows: &[(&str, Vec<f64>, f64)]) -> Dataset {
        let p = rows[0].1.len();
        let names: Vec<String> = (0..p).map(|i| format!("f{i}")).collect();
        let rows = rows
            .iter()
            .enumerate()
            .map(|(k, (s, x, y))| Row {
                subject_id: s.to_string(),
                row_id: format!("r{k:03}"),
                features: FeatureVector::new(names.clone(), x.clone(), TargetVariant::Fvc).unwrap(),
                target: *y,
                tags: BTreeMap::new(),
            })
            .collect();
        Dataset::new(rows, TargetVariant::Fvc).unwrap()
    }

    fn all_hypers() -> Vec<Hyper> {
        vec![
            Hyper::Linear,
            Hyper::RandomForest { trees: 15 },
            Hyper::Svr {
                c: 1.0,
                kernel: Kernel::Rbf,
                epsilon: SVR_EPSILON,
            },
        ]
    }

    #[test]
    fn constant_target_every_model() {
        let rows: Vec<(&str, Vec<f64>, f64)> = (0..12)
            .map(|i| (["a", "b", "c"][i % 3], vec![i as f64, (i * i) as f64 * 0.1], 3.3))
            .collect();
        let d = dataset(&rows);
        let probe = FeatureVector::new(d.names().to_vec(), vec![40.0, -7.0], TargetVariant::Fvc).unwrap();
        for h in all_hypers() {
            let m = fit(&d, &h, d.names(), 1).unwrap();
            assert!((m.predict(&probe).unwrap() - 3.3).abs() < 1e-6, "{h:?}");
        }
    }

    #[test]
    fn step_function_forest_beats_linear() {
        let rows: Vec<(&str, Vec<f64>, f64)> = (0..50)
            .map(|i| {
                let x = i as f64 / 50.0;
                (["a", "b"][i % 2], vec![x], if x < 0.5 { 1.0 } else { 3.0 })
            })
            .collect();
        let d = dataset(&rows);
        let mse = |h: Hyper| {
            let m = fit(&d, &h, d.names(), 0).unwrap();
            d.rows()
                .iter()
                .map(|r| (m.predict(&r.features).unwrap() - r.target).powi(2))
                .sum::<f64>()
                / 50.0
        };
        assert!(mse(Hyper::RandomForest { trees: 50 }) < mse(Hyper::Linear));
    }

    #[test]
    fn schema_mismatch_and_determinism() {
        let rows: Vec<(&str, Vec<f64>, f64)> = (0..9)
            .map(|i| (["a", "b", "c"][i % 3], vec![i as f64, 1.0], 1.0 + i as f64))
            .collect();
        let d = dataset(&rows);
        let m = fit(&d, &Hyper::RandomForest { trees: 9 }, d.names(), 5).unwrap();
        let bad = FeatureVector::new(vec!["g".into(), "f1".into()], vec![0.0, 0.0], TargetVariant::Fvc).unwrap();
        assert!(matches!(m.predict(&bad), Err(Error::SchemaError(_))));
        let fv = &d.rows()[4].features;
        assert_eq!(m.predict(fv).unwrap(), m.predict(fv).unwrap());
        let trees = m.tree_predictions(fv).unwrap();
        assert_eq!(m.predict(fv).unwrap(), trees.iter().sum::<f64>() / trees.len() as f64);
        let back = TrainedEstimator::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn one_subject_refused() {
        let d = dataset(&[("a", vec![1.0], 1.0), ("a", vec![2.0], 2.0)]);
        assert!(fit(&d, &Hyper::Linear, d.names(), 0).is_err());
    }
}
