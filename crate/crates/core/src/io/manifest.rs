//! Dataset manifests.
//!
//! A manifest lists one recording per entry with its ground truth. JSON
//! manifests look like
//!
//! ```json
//! {"schema_version": "spiro-manifest/1", "entries": [
//!   {"subject_id": "s01", "mask_type": "n95", "maneuver": "forced",
//!    "sensor_position": "C1", "audio_path": "s01_forced.wav",
//!    "fvc_l": 4.1, "fev1_l": 3.4, "pef_ls": 7.9}
//! ]}
//! ```
//!
//! CSV manifests carry the same fields as columns plus a `schema_version`
//! column repeated on every row; demographics become `age_years`, `sex`,
//! `height_cm` and `weight_kg` columns. Relative paths resolve against the
//! manifest's directory. `trial` (default 0) distinguishes repeated
//! recordings that share subject, maneuver, mask and position.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{assemble_from_curves, FeatureSchema, TargetVariant};
use crate::forced::{maneuver_curves, ManeuverCurves};
use crate::learn::{Dataset, Row};

use super::wav::load_wav;

pub const MANIFEST_SCHEMA_VERSION: &str = "spiro-manifest/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskType {
    N95,
    Cloth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Maneuver {
    Forced,
    Tidal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SensorPosition {
    L1,
    C1,
    R1,
    L3,
    R3,
    #[serde(rename = "unknown")]
    Unknown,
}

impl MaskType {
    pub fn as_str(&self) -> &'static str {
        match self {
            MaskType::N95 => "n95",
            MaskType::Cloth => "cloth",
        }
    }
}

impl Maneuver {
    pub fn as_str(&self) -> &'static str {
        match self {
            Maneuver::Forced => "forced",
            Maneuver::Tidal => "tidal",
        }
    }
}

impl SensorPosition {
    pub const ALL: [SensorPosition; 6] = [
        SensorPosition::L1,
        SensorPosition::C1,
        SensorPosition::R1,
        SensorPosition::L3,
        SensorPosition::R3,
        SensorPosition::Unknown,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SensorPosition::L1 => "L1",
            SensorPosition::C1 => "C1",
            SensorPosition::R1 => "R1",
            SensorPosition::L3 => "L3",
            SensorPosition::R3 => "R3",
            SensorPosition::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown sensor position {s:?}")))
    }
}

impl fmt::Display for SensorPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_years: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sex: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_kg: Option<f64>,
}

impl Demographics {
    fn is_empty(&self) -> bool {
        *self == Demographics::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub mask_type: MaskType,
    pub maneuver: Maneuver,
    #[serde(default = "unknown_position")]
    pub sensor_position: SensorPosition,
    #[serde(default)]
    pub trial: u32,
    pub audio_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fvc_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fev1_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pef_ls: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rr_bpm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accel_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demographics: Option<Demographics>,
}

fn unknown_position() -> SensorPosition {
    SensorPosition::Unknown
}

impl ManifestEntry {
    /// `subject/maneuver/mask/position#trial`; unique within a manifest.
    pub fn key(&self) -> String {
        format!(
            "{}/{}/{}/{}#{}",
            self.subject_id,
            self.maneuver.as_str(),
            self.mask_type.as_str(),
            self.sensor_position,
            self.trial
        )
    }

    /// Spirometer value for a lung-parameter target.
    pub fn truth(&self, target: TargetVariant) -> Option<f64> {
        match target {
            TargetVariant::Pef => self.pef_ls,
            TargetVariant::Fev1 => self.fev1_l,
            TargetVariant::Fvc => self.fvc_l,
            TargetVariant::Generic => None,
        }
    }

    fn tags(&self) -> BTreeMap<String, String> {
        let mut tags = BTreeMap::new();
        tags.insert("mask_type".into(), self.mask_type.as_str().into());
        tags.insert("position".into(), self.sensor_position.as_str().into());
        tags
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: String,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    schema_version: String,
    subject_id: String,
    mask_type: MaskType,
    maneuver: Maneuver,
    #[serde(default = "unknown_position")]
    sensor_position: SensorPosition,
    #[serde(default)]
    trial: u32,
    audio_path: PathBuf,
    fvc_l: Option<f64>,
    fev1_l: Option<f64>,
    pef_ls: Option<f64>,
    rr_bpm: Option<f64>,
    accel_path: Option<PathBuf>,
    age_years: Option<f64>,
    sex: Option<String>,
    height_cm: Option<f64>,
    weight_kg: Option<f64>,
}

impl From<CsvRow> for ManifestEntry {
    fn from(r: CsvRow) -> Self {
        let demo = Demographics {
            age_years: r.age_years,
            sex: r.sex.filter(|s| !s.is_empty()),
            height_cm: r.height_cm,
            weight_kg: r.weight_kg,
        };
        ManifestEntry {
            subject_id: r.subject_id,
            mask_type: r.mask_type,
            maneuver: r.maneuver,
            sensor_position: r.sensor_position,
            trial: r.trial,
            audio_path: r.audio_path,
            fvc_l: r.fvc_l,
            fev1_l: r.fev1_l,
            pef_ls: r.pef_ls,
            rr_bpm: r.rr_bpm,
            accel_path: r.accel_path.filter(|p| !p.as_os_str().is_empty()),
            demographics: (!demo.is_empty()).then_some(demo),
        }
    }
}

impl From<&ManifestEntry> for CsvRow {
    fn from(e: &ManifestEntry) -> Self {
        let d = e.demographics.clone().unwrap_or_default();
        CsvRow {
            schema_version: MANIFEST_SCHEMA_VERSION.into(),
            subject_id: e.subject_id.clone(),
            mask_type: e.mask_type,
            maneuver: e.maneuver,
            sensor_position: e.sensor_position,
            trial: e.trial,
            audio_path: e.audio_path.clone(),
            fvc_l: e.fvc_l,
            fev1_l: e.fev1_l,
            pef_ls: e.pef_ls,
            rr_bpm: e.rr_bpm,
            accel_path: e.accel_path.clone(),
            age_years: d.age_years,
            sex: d.sex,
            height_cm: d.height_cm,
            weight_kg: d.weight_kg,
        }
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

fn check_positive(entry: &str, field: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if x.is_finite() && x > 0.0 => Ok(()),
        Some(x) => Err(Error::ValidationError {
            entry: entry.into(),
            message: format!("{field} must be positive, got {x}"),
        }),
        None => Err(Error::ValidationError {
            entry: entry.into(),
            message: format!("forced entry is missing {field}"),
        }),
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION.into(),
            entries,
        }
    }

    /// Check version, ground truth and key uniqueness, then make paths
    /// absolute against `base` and require that they exist.
    pub fn validate(mut self, base: &Path) -> Result<Self> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::SchemaError(format!(
                "manifest schema {:?}, expected {MANIFEST_SCHEMA_VERSION:?}",
                self.schema_version
            )));
        }
        let mut keys = BTreeSet::new();
        for e in &mut self.entries {
            let key = e.key();
            if e.subject_id.is_empty() {
                return Err(Error::ValidationError {
                    entry: key,
                    message: "empty subject id".into(),
                });
            }
            match e.maneuver {
                Maneuver::Forced => {
                    check_positive(&key, "fvc_l", e.fvc_l)?;
                    check_positive(&key, "fev1_l", e.fev1_l)?;
                    check_positive(&key, "pef_ls", e.pef_ls)?;
                }
                Maneuver::Tidal => {
                    if e.rr_bpm.is_none() && e.accel_path.is_none() {
                        return Err(Error::ValidationError {
                            entry: key,
                            message: "tidal entry needs rr_bpm or accel_path".into(),
                        });
                    }
                    if let Some(rr) = e.rr_bpm {
                        check_positive(&key, "rr_bpm", Some(rr))?;
                    }
                }
            }
            e.audio_path = resolve(base, &e.audio_path);
            if let Some(a) = &e.accel_path {
                e.accel_path = Some(resolve(base, a));
            }
            for p in std::iter::once(&e.audio_path).chain(e.accel_path.as_ref()) {
                if !p.is_file() {
                    return Err(Error::ValidationError {
                        entry: key.clone(),
                        message: format!("{} does not exist", p.display()),
                    });
                }
            }
            if !keys.insert(key.clone()) {
                return Err(Error::ValidationError {
                    entry: key,
                    message: "duplicate subject/maneuver/mask/position/trial".into(),
                });
            }
        }
        Ok(self)
    }

    pub fn forced(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.maneuver == Maneuver::Forced)
    }

    pub fn tidal(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.maneuver == Maneuver::Tidal)
    }
}

/// Parse a manifest without touching the file system; paths stay as written.
pub fn parse_manifest(text: &str, csv_format: bool) -> Result<Manifest> {
    if !csv_format {
        return Ok(serde_json::from_str(text)?);
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut version = None;
    let mut entries = Vec::new();
    for row in reader.deserialize() {
        let r: CsvRow = row?;
        match &version {
            None => version = Some(r.schema_version.clone()),
            Some(v) if *v != r.schema_version => {
                return Err(Error::SchemaError("schema_version differs between rows".into()));
            }
            Some(_) => {}
        }
        entries.push(r.into());
    }
    Ok(Manifest {
        schema_version: version.unwrap_or_else(|| MANIFEST_SCHEMA_VERSION.into()),
        entries,
    })
}

/// Read and validate a `.json` or `.csv` manifest.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, is_csv(path))?.validate(base)
}

/// Write as JSON or CSV by extension.
pub fn save_manifest(m: &Manifest, path: &Path) -> Result<()> {
    let text = if is_csv(path) {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &m.entries {
            w.serialize(CsvRow::from(e))?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::invalid(e.to_string()))?)
            .map_err(|e| Error::invalid(e.to_string()))?
    } else {
        let mut s = serde_json::to_string_pretty(m)?;
        s.push('\n');
        s
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Features and spirometer truth for `entries`, one dataset per target.
/// Each recording is analyzed once. Rejected maneuvers are dropped;
/// subjects left with no maneuver are listed as excluded.
pub fn forced_datasets(
    entries: &[&ManifestEntry],
    targets: &[TargetVariant],
    schema: &FeatureSchema,
) -> Result<Vec<Dataset>> {
    use rayon::prelude::*;
    let curves = entries
        .par_iter()
        .map(|e| -> Result<Option<ManeuverCurves>> {
            for &t in targets {
                if e.truth(t).is_none() {
                    return Err(Error::ValidationError {
                        entry: e.key(),
                        message: format!("no {} ground truth", t.as_str()),
                    });
                }
            }
            match maneuver_curves(&load_wav(&e.audio_path)?) {
                Ok(c) if c.verdict.accepted => Ok(Some(c)),
                Ok(_) | Err(Error::OnsetNotFound) => Ok(None),
                Err(err) => Err(err),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let all: BTreeSet<String> = entries.iter().map(|e| e.subject_id.clone()).collect();
    targets
        .iter()
        .map(|&target| {
            let rows = entries
                .par_iter()
                .zip(&curves)
                .filter_map(|(e, c)| c.as_ref().map(|c| (e, c)))
                .map(|(e, c)| {
                    Ok(Row {
                        subject_id: e.subject_id.clone(),
                        row_id: e.key(),
                        features: assemble_from_curves(c, target, schema)?,
                        target: e.truth(target).unwrap_or_default(),
                        tags: e.tags(),
                    })
                })
                .collect::<Result<Vec<Row>>>()?;
            if rows.is_empty() {
                return Err(Error::InvalidDataset("every forced maneuver was rejected".into()));
            }
            let kept: BTreeSet<String> = rows.iter().map(|r| r.subject_id.clone()).collect();
            Ok(Dataset::new(rows, target)?.with_excluded(all.difference(&kept).cloned()))
        })
        .collect()
}

/// [`forced_datasets`] for a single target.
pub fn forced_dataset(entries: &[&ManifestEntry], target: TargetVariant, schema: &FeatureSchema) -> Result<Dataset> {
    Ok(forced_datasets(entries, &[target], schema)?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forced_entry(subject: &str) -> ManifestEntry {
        ManifestEntry {
            subject_id: subject.into(),
            mask_type: MaskType::N95,
            maneuver: Maneuver::Forced,
            sensor_position: SensorPosition::C1,
            trial: 0,
            audio_path: "a.wav".into(),
            fvc_l: Some(4.0),
            fev1_l: Some(3.2),
            pef_ls: Some(7.0),
            rr_bpm: None,
            accel_path: None,
            demographics: None,
        }
    }

    fn dir_with_audio() -> tempfile::TempDir {
        let d = tempfile::tempdir().unwrap();
        fs::write(d.path().join("a.wav"), b"").unwrap();
        d
    }

    #[test]
    fn one_entry_validates() {
        let d = dir_with_audio();
        let m = Manifest::new(vec![forced_entry("s1")]).validate(d.path()).unwrap();
        assert_eq!(m.entries.len(), 1);
        assert!(m.entries[0].audio_path.is_absolute());
    }

    #[test]
    fn missing_pef_named() {
        let d = dir_with_audio();
        let mut e = forced_entry("s1");
        e.pef_ls = None;
        match Manifest::new(vec![e]).validate(d.path()) {
            Err(Error::ValidationError { entry, message }) => {
                assert_eq!(entry, "s1/forced/n95/C1#0");
                assert!(message.contains("pef_ls"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_key_rejected() {
        let d = dir_with_audio();
        let m = Manifest::new(vec![forced_entry("s1"), forced_entry("s1")]);
        assert!(matches!(m.validate(d.path()), Err(Error::ValidationError { .. })));
        let mut second = forced_entry("s1");
        second.trial = 1;
        let m = Manifest::new(vec![forced_entry("s1"), second]);
        assert_eq!(m.validate(d.path()).unwrap().entries.len(), 2);
    }

    #[test]
    fn tidal_needs_truth_and_paths_must_exist() {
        let d = dir_with_audio();
        let mut e = forced_entry("s1");
        e.maneuver = Maneuver::Tidal;
        e.fvc_l = None;
        assert!(Manifest::new(vec![e.clone()]).validate(d.path()).is_err());
        e.rr_bpm = Some(15.0);
        assert!(Manifest::new(vec![e.clone()]).validate(d.path()).is_ok());
        e.accel_path = Some("missing.csv".into());
        assert!(Manifest::new(vec![e]).validate(d.path()).is_err());
    }

    #[test]
    fn version_checked() {
        let d = dir_with_audio();
        let mut m = Manifest::new(vec![forced_entry("s1")]);
        m.schema_version = "other/9".into();
        assert!(matches!(m.validate(d.path()), Err(Error::SchemaError(_))));
    }

    #[test]
    fn json_and_csv_round_trip() {
        let d = dir_with_audio();
        let mut e = forced_entry("s2");
        e.demographics = Some(Demographics {
            age_years: Some(31.0),
            sex: Some("f".into()),
            ..Default::default()
        });
        let m = Manifest::new(vec![forced_entry("s1"), e]);
        for name in ["m.json", "m.csv"] {
            let p = d.path().join(name);
            save_manifest(&m, &p).unwrap();
            let back = load_manifest(&p).unwrap();
            let expected = m.clone().validate(d.path()).unwrap();
            assert_eq!(back, expected, "{name}");
        }
    }
}
