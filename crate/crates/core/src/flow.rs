//! Flow-time, volume-time and flow-volume curves built from the smoothed
//! envelope, and the rule-based maneuver shape check.
//!
//! Flow here is the uncalibrated envelope proxy; volume is its running sum
//! in the same units (no `dt` factor). Calibration to liters is left to the
//! regression models.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Envelope;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTimeCurve {
    flow: Vec<f64>,
    sample_rate_hz: u32,
}

impl FlowTimeCurve {
    pub fn new(flow: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if flow.is_empty() {
            return Err(Error::invalid("flow curve is empty"));
        }
        if sample_rate_hz == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if flow.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("flow must be finite and nonnegative"));
        }
        Ok(Self { flow, sample_rate_hz })
    }

    pub fn from_envelope(env: &Envelope) -> Result<Self> {
        Self::new(env.values().to_vec(), env.sample_rate_hz())
    }

    pub fn flow(&self) -> &[f64] {
        &self.flow
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.flow.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flow.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeTimeCurve {
    pub volume: Vec<f64>,
    pub sample_rate_hz: u32,
}

/// Running sum of flow.
pub fn volume_time(f: &FlowTimeCurve) -> VolumeTimeCurve {
    let mut acc = 0.0;
    let volume = f
        .flow
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    VolumeTimeCurve {
        volume,
        sample_rate_hz: f.sample_rate_hz,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowVolumeCurve {
    /// `(volume, flow)` pairs.
    pub points: Vec<(f64, f64)>,
    /// Index of the maximum flow. When the maximum is held over a run of
    /// equal samples this is the middle of the first such run.
    pub pef_index: usize,
}

impl FlowVolumeCurve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn pef(&self) -> f64 {
        self.points[self.pef_index].1
    }

    pub fn total_volume(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.0)
    }

    pub fn flows(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }
}

pub fn flow_volume(f: &FlowTimeCurve) -> FlowVolumeCurve {
    let vt = volume_time(f);
    let first = f
        .flow
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > f.flow[best] { i } else { best });
    let run = f.flow[first..].iter().take_while(|&&v| v == f.flow[first]).count();
    let pef_index = first + (run - 1) / 2;
    FlowVolumeCurve {
        points: vt.volume.into_iter().zip(f.flow.iter().copied()).collect(),
        pef_index,
    }
}

/// Shape rules applied to a flow-volume curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ShapeRule {
    /// Peak flow is reached early in the exhaled volume.
    R1,
    /// Flow after the peak is predominantly non-increasing.
    R2,
    /// Flow decays to near zero at the end.
    R3,
}

impl fmt::Display for ShapeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ShapeRule::R1 => "R1 (peak flow not in early volume)",
            ShapeRule::R2 => "R2 (post-peak flow not decreasing)",
            ShapeRule::R3 => "R3 (terminal flow too high)",
        };
        f.write_str(s)
    }
}

/// Thresholds for [`shape_check`]. All are ratios, so the verdict does not
/// depend on the flow scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeConfig {
    /// R1: the peak must lie within this fraction of the total volume.
    pub peak_volume_fraction: f64,
    /// R2: the post-peak curve is cut into this many equal segments.
    pub decay_segments: usize,
    /// R2: a segment's rise must not exceed this fraction of PEF.
    pub decay_tolerance: f64,
    /// R2: required fraction of non-increasing segments.
    pub decay_fraction: f64,
    /// R3: terminal flow must be below this fraction of PEF.
    pub terminal_fraction: f64,
    /// R3: terminal flow is the mean over this trailing fraction of points.
    pub terminal_window: f64,
}

impl Default for ShapeConfig {
    fn default() -> Self {
        Self {
            peak_volume_fraction: 0.3,
            decay_segments: 50,
            decay_tolerance: 0.05,
            decay_fraction: 0.9,
            terminal_fraction: 0.1,
            terminal_window: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeVerdict {
    pub accepted: bool,
    pub reasons: Vec<ShapeRule>,
}

pub const MIN_SHAPE_POINTS: usize = 10;

pub fn shape_check(c: &FlowVolumeCurve) -> Result<ShapeVerdict> {
    shape_check_with(c, &ShapeConfig::default())
}

pub fn shape_check_with(c: &FlowVolumeCurve, cfg: &ShapeConfig) -> Result<ShapeVerdict> {
    let n = c.len();
    if n < MIN_SHAPE_POINTS {
        return Err(Error::invalid(format!(
            "shape check needs at least {MIN_SHAPE_POINTS} points, got {n}"
        )));
    }
    let flows = c.flows();
    let pef = c.pef();
    let total = c.total_volume();
    let mut reasons = Vec::new();

    // A curve with no flow has no peak, no decay and no shape to speak of.
    if !(pef > 0.0) || !(total > 0.0) {
        return Ok(ShapeVerdict {
            accepted: false,
            reasons: vec![ShapeRule::R1, ShapeRule::R2, ShapeRule::R3],
        });
    }

    if c.points[c.pef_index].0 / total > cfg.peak_volume_fraction {
        reasons.push(ShapeRule::R1);
    }

    let tail = &flows[c.pef_index..];
    let segments = cfg.decay_segments.max(1).min(tail.len().saturating_sub(1));
    if segments > 0 {
        let stride = (tail.len() - 1) as f64 / segments as f64;
        let at = |k: usize| tail[((k as f64 * stride).round() as usize).min(tail.len() - 1)];
        let ok = (0..segments)
            .filter(|&k| at(k + 1) - at(k) <= cfg.decay_tolerance * pef)
            .count();
        if (ok as f64) < cfg.decay_fraction * segments as f64 {
            reasons.push(ShapeRule::R2);
        }
    }

    let w = ((cfg.terminal_window * n as f64).ceil() as usize).clamp(1, n);
    let terminal = flows[n - w..].iter().sum::<f64>() / w as f64;
    if terminal >= cfg.terminal_fraction * pef {
        reasons.push(ShapeRule::R3);
    }

    Ok(ShapeVerdict {
        accepted: reasons.is_empty(),
        reasons,
    })
}

/// Write `t_s,flow,volume` rows.
pub fn write_curve_csv<W: Write>(f: &FlowTimeCurve, out: W) -> Result<()> {
    let vt = volume_time(f);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t_s", "flow", "volume"])?;
    let rate = f.sample_rate_hz as f64;
    for (i, (flow, vol)) in f.flow.iter().zip(&vt.volume).enumerate() {
        w.write_record([format!("{}", i as f64 / rate), format!("{flow}"), format!("{vol}")])?;
    }
    w.flush().map_err(|e| Error::io(Path::new("<csv>"), e))?;
    Ok(())
}

pub fn save_curve_csv(f: &FlowTimeCurve, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_curve_csv(f, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(flow: Vec<f64>) -> FlowVolumeCurve {
        flow_volume(&FlowTimeCurve::new(flow, 100).unwrap())
    }

    /// Rapid rise then `(1 - u)^2` decay, then silence.
    fn maneuver(n_decay: usize, n_silence: usize) -> Vec<f64> {
        let mut f = vec![0.0, 2.0, 4.0, 6.0];
        f.extend((0..n_decay).map(|i| 6.0 * (1.0 - i as f64 / n_decay as f64).powi(2)));
        f.extend(std::iter::repeat(0.0).take(n_silence));
        f
    }

    #[test]
    fn volume_examples() {
        let v = volume_time(&FlowTimeCurve::new(vec![1.0, 1.0, 1.0], 1).unwrap());
        assert_eq!(v.volume, vec![1.0, 2.0, 3.0]);
        let v = volume_time(&FlowTimeCurve::new(vec![0.0; 4], 1).unwrap());
        assert_eq!(v.volume, vec![0.0; 4]);
    }

    #[test]
    fn triangular_flow() {
        let c = curve(vec![0.0, 1.0, 2.0, 1.0, 0.0]);
        assert_eq!(c.pef_index, 2);
        assert_eq!(c.total_volume(), 4.0);
        assert_eq!(curve(vec![5.0, 4.0, 3.0]).pef_index, 0);
    }

    #[test]
    fn accepts_decaying_maneuver() {
        let v = shape_check(&curve(maneuver(200, 100))).unwrap();
        assert!(v.accepted, "{:?}", v.reasons);
    }

    #[test]
    fn truncated_tail_fails_r3() {
        let full = maneuver(200, 0);
        let cut = full[..4 + 120].to_vec();
        let v = shape_check(&curve(cut)).unwrap();
        assert!(!v.accepted);
        assert!(v.reasons.contains(&ShapeRule::R3));
    }

    #[test]
    fn flat_flow_fails_r1_and_r3() {
        let v = shape_check(&curve(vec![1.0; 50])).unwrap();
        assert_eq!(v.reasons, vec![ShapeRule::R1, ShapeRule::R3]);
    }

    #[test]
    fn rising_tail_fails_r2() {
        let mut f = maneuver(200, 50);
        // A second hump partway down the tail.
        for (i, v) in f.iter_mut().enumerate().take(200).skip(100) {
            *v += 5.0 * (std::f64::consts::PI * (i - 100) as f64 / 100.0).sin();
        }
        let v = shape_check(&curve(f)).unwrap();
        assert!(v.reasons.contains(&ShapeRule::R2), "{:?}", v.reasons);
    }

    #[test]
    fn too_few_points() {
        assert!(shape_check(&curve(vec![1.0; 9])).is_err());
    }

    #[test]
    fn csv_columns() {
        let f = FlowTimeCurve::new(vec![1.0, 2.0], 10).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&f, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "t_s,flow,volume\n0,1,1\n0.1,2,3\n");
    }

    proptest! {
        #[test]
        fn volume_nondecreasing(flow in prop::collection::vec(0.0f64..10.0, 1..200)) {
            let f = FlowTimeCurve::new(flow.clone(), 100).unwrap();
            let v = volume_time(&f);
            prop_assert!(v.volume.windows(2).all(|w| w[1] >= w[0]));
            let c = flow_volume(&f);
            prop_assert_eq!(c.len(), flow.len());
            prop_assert_eq!(c.pef(), flow.iter().cloned().fold(0.0, f64::max));
        }

        #[test]
        fn verdict_scale_invariant(
            flow in prop::collection::vec(0.0f64..10.0, 10..200),
            k in 0u32..20,
        ) {
            // Powers of two keep every ratio exact in floating point.
            let c = 2f64.powi(k as i32 - 10);
            let a = shape_check(&curve(flow.clone())).unwrap();
            let b = shape_check(&curve(flow.iter().map(|v| v * c).collect())).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
