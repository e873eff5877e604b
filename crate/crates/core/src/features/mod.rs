//! Frame-level spectral features, whole-signal temporal descriptors and the
//! per-target feature vectors fed to the regressors.

mod assemble;
mod frames;
mod mel;
mod temporal;

pub use assemble::{assemble, assemble_from_curves, schema, FeatureSchema, SCHEMA_VERSION};
pub use frames::{frame_count, frame_signal, hann_window, power_bands, power_spectrum, FrameConfig, Frames};
pub use mel::{
    hz_to_mel, log_mfe, mel_filterbank, mel_to_hz, melspectrogram, mfcc, mfcc_mvn, mfe, mvn_columns, MelConfig,
    LOG_EPSILON,
};
pub use temporal::{temporal_features, TEMPORAL_NAMES};

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which lung parameter a vector was assembled for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetVariant {
    Pef,
    Fev1,
    Fvc,
    Generic,
}

impl TargetVariant {
    pub const LUNG: [TargetVariant; 3] = [TargetVariant::Pef, TargetVariant::Fev1, TargetVariant::Fvc];

    pub fn as_str(&self) -> &'static str {
        match self {
            TargetVariant::Pef => "pef",
            TargetVariant::Fev1 => "fev1",
            TargetVariant::Fvc => "fvc",
            TargetVariant::Generic => "generic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pef" => Ok(TargetVariant::Pef),
            "fev1" => Ok(TargetVariant::Fev1),
            "fvc" => Ok(TargetVariant::Fvc),
            "generic" => Ok(TargetVariant::Generic),
            other => Err(Error::invalid(format!("unknown target {other:?}"))),
        }
    }
}

/// Named, ordered feature values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    names: Vec<String>,
    values: Vec<f64>,
    target_variant: TargetVariant,
}

impl FeatureVector {
    pub fn new(names: Vec<String>, values: Vec<f64>, target_variant: TargetVariant) -> Result<Self> {
        if names.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} names for {} values",
                names.len(),
                values.len()
            )));
        }
        let mut seen = HashSet::with_capacity(names.len());
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::invalid(format!("duplicate feature name {dup:?}")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("feature {:?} is not finite", names[i])));
        }
        Ok(Self {
            names,
            values,
            target_variant,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn target_variant(&self) -> TargetVariant {
        self.target_variant
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    /// Concatenate, prefixing every name of `other`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &FeatureVector) -> Result<()> {
        let mut names = std::mem::take(&mut self.names);
        let mut values = std::mem::take(&mut self.values);
        names.extend(other.names.iter().map(|n| format!("{prefix}{n}")));
        values.extend_from_slice(&other.values);
        *self = FeatureVector::new(names, values, self.target_variant)?;
        Ok(())
    }
}

/// Write vectors sharing one schema as CSV. The first column carries the
/// schema version and the row label.
pub fn write_feature_csv<W: Write>(rows: &[(String, FeatureVector)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some((_, first)) = rows.first() else {
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        return Ok(());
    };
    let mut header = vec!["schema".to_string(), "label".to_string(), "target".to_string()];
    header.extend(first.names.iter().cloned());
    w.write_record(&header)?;
    for (label, fv) in rows {
        if fv.names != first.names {
            return Err(Error::SchemaError(format!("row {label:?} has a different schema")));
        }
        let mut rec = vec![
            SCHEMA_VERSION.to_string(),
            label.clone(),
            fv.target_variant.as_str().to_string(),
        ];
        rec.extend(fv.values.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(input: R) -> Result<Vec<(String, FeatureVector)>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.len() < 3 || &header[0] != "schema" {
        return Err(Error::SchemaError("missing schema column".into()));
    }
    let names: Vec<String> = header.iter().skip(3).map(String::from).collect();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if &rec[0] != SCHEMA_VERSION {
            return Err(Error::SchemaError(format!(
                "schema {:?}, expected {SCHEMA_VERSION:?}",
                &rec[0]
            )));
        }
        let values = rec
            .iter()
            .skip(3)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::SchemaError(format!("bad number {v:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let target = TargetVariant::parse(&rec[2])?;
        out.push((rec[1].to_string(), FeatureVector::new(names.clone(), values, target)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_validation() {
        assert!(FeatureVector::new(vec!["a".into()], vec![], TargetVariant::Generic).is_err());
        assert!(FeatureVector::new(vec!["a".into(), "a".into()], vec![1.0, 2.0], TargetVariant::Generic).is_err());
        assert!(FeatureVector::new(vec!["a".into()], vec![f64::NAN], TargetVariant::Generic).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let fv = FeatureVector::new(
            vec!["x".into(), "y".into()],
            vec![0.1 + 0.2, -1e-300],
            TargetVariant::Pef,
        )
        .unwrap();
        let rows = vec![("s1".to_string(), fv)];
        let mut buf = Vec::new();
        write_feature_csv(&rows, &mut buf).unwrap();
        let back = read_feature_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
    }
}
