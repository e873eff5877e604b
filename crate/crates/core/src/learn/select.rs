//! Inner cross-validation scoring and sequential forward selection.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::inner_folds;
use super::dataset::Dataset;
use super::{fit_state, percentage_error, Hyper, ModelState, MIN_PREDICTION};
use crate::error::{Error, Result};

pub const SFS_TOLERANCE: f64 = 1e-4;

/// Mean over subjects of each subject's mean row percentage error.
pub(crate) fn subject_mpe(rows: &[(&str, f64, f64)]) -> Result<(BTreeMap<String, f64>, f64)> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for &(s, truth, est) in rows {
        let e = acc.entry(s.to_string()).or_insert((0.0, 0));
        e.0 += percentage_error(truth, est)?;
        e.1 += 1;
    }
    let per: BTreeMap<String, f64> = acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    let mpe = per.values().sum::<f64>() / per.len() as f64;
    Ok((per, mpe))
}

/// Out-of-fold predictions of every grid entry, one vector per entry in
/// canonical row order. Empty `features` means the training-mean predictor.
fn grid_predictions(data: &Dataset, grid: &[Hyper], features: &[String], seed: u64) -> Result<Vec<Vec<f64>>> {
    let cols = data.columns(features)?;
    let x = data.matrix(&cols);
    let y = data.targets();
    let subjects: Vec<&str> = data.rows().iter().map(|r| r.subject_id.as_str()).collect();
    let mut out = vec![vec![0.0; data.len()]; grid.len()];
    let max_trees = grid
        .iter()
        .filter_map(|h| match h {
            Hyper::RandomForest { trees } => Some(*trees),
            _ => None,
        })
        .max();
    for fold in inner_folds(&data.subjects()) {
        let test: Vec<usize> = (0..data.len())
            .filter(|&i| fold.iter().any(|s| s == subjects[i]))
            .collect();
        let train: Vec<usize> = (0..data.len())
            .filter(|&i| !fold.iter().any(|s| s == subjects[i]))
            .collect();
        let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        if cols.is_empty() {
            let mean = yt.iter().sum::<f64>() / yt.len() as f64;
            for preds in out.iter_mut() {
                for &i in &test {
                    preds[i] = mean.max(MIN_PREDICTION);
                }
            }
            continue;
        }
        // Trees use per-index seeds, so prefixes of the largest forest are
        // exactly the smaller forests of the grid.
        let forest = max_trees.map(|t| fit_state(&xt, &yt, &Hyper::RandomForest { trees: t }, seed));
        for (g, h) in grid.iter().enumerate() {
            let state = match h {
                Hyper::RandomForest { .. } => None,
                _ => Some(fit_state(&xt, &yt, h, seed)),
            };
            for &i in &test {
                let v = match (h, &state, &forest) {
                    (Hyper::RandomForest { trees }, _, Some(ModelState::RandomForest(f))) => {
                        f.predict_prefix(&x[i], *trees)
                    }
                    (_, Some(s), _) => s.predict(&x[i]),
                    _ => unreachable!(),
                };
                out[g][i] = v.max(MIN_PREDICTION);
            }
        }
    }
    Ok(out)
}

/// Inner-CV mean percentage error of each grid entry.
pub fn grid_cv_mpe(data: &Dataset, grid: &[Hyper], features: &[String], seed: u64) -> Result<Vec<f64>> {
    if data.subjects().len() < 2 {
        return Err(Error::InvalidDataset("inner cross-validation needs 2 subjects".into()));
    }
    let preds = grid_predictions(data, grid, features, seed)?;
    preds
        .iter()
        .map(|p| {
            let rows: Vec<(&str, f64, f64)> = data
                .rows()
                .iter()
                .zip(p)
                .map(|(r, &e)| (r.subject_id.as_str(), r.target, e))
                .collect();
            Ok(subject_mpe(&rows)?.1)
        })
        .collect()
}

pub fn cv_mpe(data: &Dataset, hyper: &Hyper, features: &[String], seed: u64) -> Result<f64> {
    Ok(grid_cv_mpe(data, std::slice::from_ref(hyper), features, seed)?[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfsConfig {
    pub max_features: usize,
    /// Model used to score candidate subsets.
    pub scorer: Hyper,
    pub tolerance: f64,
}

impl Default for SfsConfig {
    fn default() -> Self {
        Self {
            max_features: 10,
            scorer: Hyper::Linear,
            tolerance: SFS_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfsResult {
    pub selected: Vec<String>,
    /// Inner-CV MPE after each addition.
    pub mpe_path: Vec<f64>,
    /// Inner-CV MPE of the training-mean predictor.
    pub baseline_mpe: f64,
}

/// Greedy forward selection minimizing inner-CV MPE. A feature is added
/// only if it lowers the MPE by more than the tolerance; ties go to the
/// earlier feature in schema order.
pub fn sfs(data: &Dataset, cfg: &SfsConfig, seed: u64) -> Result<SfsResult> {
    let names = data.names();
    if names.len() < 2 {
        return Err(Error::invalid("feature selection needs at least 2 features"));
    }
    let baseline_mpe = cv_mpe(data, &cfg.scorer, &[], seed)?;
    let mut best = baseline_mpe;
    let mut selected: Vec<String> = Vec::new();
    let mut mpe_path = Vec::new();
    while selected.len() < cfg.max_features.min(names.len()) {
        let candidates: Vec<&String> = names.iter().filter(|n| !selected.contains(n)).collect();
        let scores: Vec<Result<f64>> = candidates
            .par_iter()
            .map(|c| {
                let mut f = selected.clone();
                f.push((*c).clone());
                cv_mpe(data, &cfg.scorer, &f, seed)
            })
            .collect();
        let mut pick: Option<(usize, f64)> = None;
        for (k, s) in scores.into_iter().enumerate() {
            let s = s?;
            if pick.is_none_or(|(_, b)| s < b) {
                pick = Some((k, s));
            }
        }
        let Some((k, s)) = pick else { break };
        if !(s < best - cfg.tolerance) {
            break;
        }
        selected.push(candidates[k].clone());
        mpe_path.push(s);
        best = s;
    }
    Ok(SfsResult {
        selected,
        mpe_path,
        baseline_mpe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::tests::dataset;
    use crate::seed;
    use rand::Rng;

    fn noisy_rows(n: usize, p: usize, target_col: Option<usize>) -> Vec<(&'static str, Vec<f64>, f64)> {
        let mut rng = seed::rng(11, 0);
        (0..n)
            .map(|i| {
                let x: Vec<f64> = (0..p).map(|_| rng.random_range(1.0..5.0)).collect();
                let y = match target_col {
                    Some(c) => x[c],
                    None => rng.random_range(2.0..4.0),
                };
                (["a", "b", "c", "d", "e", "f"][i % 6], x, y)
            })
            .collect()
    }

    #[test]
    fn oracle_feature_first() {
        let d = dataset(&noisy_rows(36, 6, Some(3)));
        let r = sfs(&d, &SfsConfig::default(), 0).unwrap();
        assert_eq!(r.selected[0], "f3");
        assert!(r.mpe_path[0] < 1e-6);
    }

    #[test]
    fn path_is_monotone() {
        let mut rows = noisy_rows(36, 5, None);
        for r in rows.iter_mut() {
            r.2 = 0.5 * r.1[0] + 0.2 * r.1[2] + 0.1 * r.1[4];
        }
        let d = dataset(&rows);
        let r = sfs(&d, &SfsConfig::default(), 0).unwrap();
        assert!(r.mpe_path.windows(2).all(|w| w[1] < w[0]));
        assert!(r.mpe_path[0] < r.baseline_mpe);
    }

    #[test]
    fn duplicate_columns_pick_one() {
        let rows: Vec<(&str, Vec<f64>, f64)> = noisy_rows(30, 3, Some(1))
            .into_iter()
            .map(|(s, x, y)| (s, vec![x[0], x[1], x[1], x[2]], y))
            .collect();
        let d = dataset(&rows);
        let r = sfs(&d, &SfsConfig::default(), 0).unwrap();
        assert_eq!(r.selected[0], "f1");
        assert!(!r.selected.contains(&"f2".to_string()));
    }

    #[test]
    fn prefix_grid_matches_separate_forests() {
        let d = dataset(&noisy_rows(24, 4, Some(0)));
        let grid = [Hyper::RandomForest { trees: 5 }, Hyper::RandomForest { trees: 15 }];
        let joint = grid_cv_mpe(&d, &grid, d.names(), 3).unwrap();
        for (h, s) in grid.iter().zip(&joint) {
            assert_eq!(cv_mpe(&d, h, d.names(), 3).unwrap(), *s);
        }
    }
}
