//! File formats: WAV audio, accelerometer CSV, dataset manifests and
//! report output.

mod accel;
mod manifest;
mod report;
mod wav;

pub use accel::{
    accel_rr, accel_rr_with, band_power, chest_motion, dominant_axis, load_accel_csv, save_accel_csv, AccelConfig,
    AccelTrace, ChestMotionParams, ACCEL_RATE_HZ, MIN_ACCEL_DURATION_S,
};
pub use manifest::{
    forced_dataset, forced_datasets, load_manifest, parse_manifest, save_manifest, Demographics, Maneuver, Manifest,
    ManifestEntry, MaskType, SensorPosition, MANIFEST_SCHEMA_VERSION,
};
pub use report::{
    bland_altman_rows, emit_eval_report, emit_table, subject_rows, to_csv, to_json, write_text, BlandAltmanRow,
    ReportFormat, SubjectErrorRow,
};
pub use wav::{decode_wav, encode_wav, load_wav, save_wav};
