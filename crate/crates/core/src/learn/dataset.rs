use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, TargetVariant};

/// One maneuver: features, ground truth and grouping tags
/// (`mask_type`, `health`, `position`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub subject_id: String,
    /// Unique within a dataset; used for the canonical row order.
    pub row_id: String,
    pub features: FeatureVector,
    pub target: f64,
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    rows: Vec<Row>,
    target_kind: TargetVariant,
    names: Vec<String>,
    /// Subjects whose maneuvers were all rejected upstream.
    excluded: BTreeSet<String>,
}

impl Dataset {
    /// Validate and sort rows by `(subject_id, row_id)`.
    pub fn new(mut rows: Vec<Row>, target_kind: TargetVariant) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidDataset("no rows".into()));
        };
        let names = first.features.names().to_vec();
        let mut ids = BTreeSet::new();
        for r in &rows {
            if r.subject_id.is_empty() {
                return Err(Error::InvalidDataset(format!("row {:?} has no subject", r.row_id)));
            }
            if r.features.names() != names.as_slice() {
                return Err(Error::SchemaError(format!(
                    "row {:?} does not share the dataset schema",
                    r.row_id
                )));
            }
            if !(r.target.is_finite() && r.target > 0.0) {
                return Err(Error::InvalidDataset(format!(
                    "row {:?} has non-positive target {}",
                    r.row_id, r.target
                )));
            }
            if !ids.insert(r.row_id.clone()) {
                return Err(Error::InvalidDataset(format!("duplicate row id {:?}", r.row_id)));
            }
        }
        rows.sort_by(|a, b| {
            (a.subject_id.as_str(), a.row_id.as_str()).cmp(&(b.subject_id.as_str(), b.row_id.as_str()))
        });
        Ok(Self {
            rows,
            target_kind,
            names,
            excluded: BTreeSet::new(),
        })
    }

    pub fn with_excluded(mut self, subjects: impl IntoIterator<Item = String>) -> Self {
        self.excluded.extend(subjects);
        self
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn target_kind(&self) -> TargetVariant {
        self.target_kind
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn excluded(&self) -> &BTreeSet<String> {
        &self.excluded
    }

    /// Sorted distinct subject ids.
    pub fn subjects(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.rows.iter().map(|r| r.subject_id.as_str()).collect();
        set.into_iter().map(String::from).collect()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }

    /// Rows whose subject satisfies `keep`, schema and exclusions preserved.
    pub fn filter_subjects(&self, keep: impl Fn(&str) -> bool) -> Dataset {
        Dataset {
            rows: self.rows.iter().filter(|r| keep(&r.subject_id)).cloned().collect(),
            target_kind: self.target_kind,
            names: self.names.clone(),
            excluded: self.excluded.clone(),
        }
    }

    pub fn filter_rows(&self, keep: impl Fn(&Row) -> bool) -> Dataset {
        Dataset {
            rows: self.rows.iter().filter(|r| keep(r)).cloned().collect(),
            target_kind: self.target_kind,
            names: self.names.clone(),
            excluded: self.excluded.clone(),
        }
    }

    /// Column indices of `features` in the schema.
    pub fn columns(&self, features: &[String]) -> Result<Vec<usize>> {
        features
            .iter()
            .map(|f| {
                self.names
                    .iter()
                    .position(|n| n == f)
                    .ok_or_else(|| Error::SchemaError(format!("unknown feature {f:?}")))
            })
            .collect()
    }

    /// Row-major matrix of the given columns.
    pub fn matrix(&self, columns: &[usize]) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| columns.iter().map(|&c| r.features.values()[c]).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(subject: &str, id: &str, x: f64, y: f64) -> Row {
        Row {
            subject_id: subject.into(),
            row_id: id.into(),
            features: FeatureVector::new(vec!["x".into()], vec![x], TargetVariant::Pef).unwrap(),
            target: y,
            tags: BTreeMap::new(),
        }
    }

    #[test]
    fn canonical_order_and_subjects() {
        let d = Dataset::new(
            vec![
                row("b", "2", 1.0, 1.0),
                row("a", "9", 2.0, 1.0),
                row("a", "1", 3.0, 1.0),
            ],
            TargetVariant::Pef,
        )
        .unwrap();
        let ids: Vec<&str> = d.rows().iter().map(|r| r.row_id.as_str()).collect();
        assert_eq!(ids, ["1", "9", "2"]);
        assert_eq!(d.subjects(), ["a", "b"]);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(Dataset::new(vec![row("a", "1", 1.0, 0.0)], TargetVariant::Pef).is_err());
        assert!(Dataset::new(vec![row("", "1", 1.0, 1.0)], TargetVariant::Pef).is_err());
        assert!(Dataset::new(
            vec![row("a", "1", 1.0, 1.0), row("b", "1", 1.0, 1.0)],
            TargetVariant::Pef
        )
        .is_err());
    }
}
