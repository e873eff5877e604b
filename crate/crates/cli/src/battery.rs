//! Battery-life estimate from a duty-cycled current profile.
//!
//! Each measurement records for `sampling_s` seconds and then classifies
//! for `classify_s` seconds; the rest of the minute is idle. Only the three
//! state currents and the resulting 1.64 mA average are known, so the
//! classification time is back-solved: with one 20 s recording per minute,
//!
//! ```text
//! 0.96 (60 - 20 - tc) + 1.6 * 20 + 4.7 tc = 1.64 * 60
//! tc = (98.4 - 0.96 * 40 - 32) / (4.7 - 0.96) = 28 / 3.74 ≈ 7.49 s
//! ```

use serde::Serialize;
use spiro_core::Error;

pub const IDLE_MA: f64 = 0.96;
pub const SAMPLING_MA: f64 = 1.6;
pub const CLASSIFY_MA: f64 = 4.7;
pub const SAMPLING_S: f64 = 20.0;
pub const TARGET_AVERAGE_MA: f64 = 1.64;

/// Classification seconds that make the default profile average 1.64 mA.
pub const fn classify_s_default() -> f64 {
    (TARGET_AVERAGE_MA * 60.0 - IDLE_MA * (60.0 - SAMPLING_S) - SAMPLING_MA * SAMPLING_S) / (CLASSIFY_MA - IDLE_MA)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatteryModel {
    pub idle_ma: f64,
    pub sampling_ma: f64,
    pub classify_ma: f64,
    pub sampling_s: f64,
    pub classify_s: f64,
    /// Measurements per minute; 0 leaves the device idle.
    pub per_minute: f64,
    pub active_hours_per_day: f64,
    pub capacity_mah: f64,
    /// Drain idle current for the remaining hours of the day too.
    pub idle_drain: bool,
}

impl Default for BatteryModel {
    fn default() -> Self {
        Self {
            idle_ma: IDLE_MA,
            sampling_ma: SAMPLING_MA,
            classify_ma: CLASSIFY_MA,
            sampling_s: SAMPLING_S,
            classify_s: classify_s_default(),
            per_minute: 1.0,
            active_hours_per_day: 11.0,
            capacity_mah: 240.0,
            idle_drain: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatteryReport {
    pub model: BatteryModel,
    pub average_ma: f64,
    pub mah_per_day: f64,
    pub active_hours: f64,
    pub days: f64,
}

impl BatteryModel {
    pub fn average_ma(&self) -> f64 {
        let busy = self.per_minute
            * (self.sampling_s * (self.sampling_ma - self.idle_ma)
                + self.classify_s * (self.classify_ma - self.idle_ma));
        self.idle_ma + busy / 60.0
    }

    pub fn estimate(&self) -> Result<BatteryReport, Error> {
        let positive = [self.idle_ma, self.sampling_ma, self.classify_ma, self.capacity_mah];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInput("currents and capacity must be positive".into()));
        }
        if !(self.sampling_s >= 0.0 && self.classify_s >= 0.0 && self.per_minute >= 0.0) {
            return Err(Error::InvalidInput("durations and duty must be nonnegative".into()));
        }
        if self.per_minute * (self.sampling_s + self.classify_s) > 60.0 {
            return Err(Error::InvalidInput("measurements do not fit in a minute".into()));
        }
        if !(self.active_hours_per_day > 0.0 && self.active_hours_per_day <= 24.0) {
            return Err(Error::InvalidInput("active hours must be in (0, 24]".into()));
        }
        let average_ma = self.average_ma();
        let mut mah_per_day = average_ma * self.active_hours_per_day;
        if self.idle_drain {
            mah_per_day += self.idle_ma * (24.0 - self.active_hours_per_day);
        }
        Ok(BatteryReport {
            model: self.clone(),
            average_ma,
            mah_per_day,
            active_hours: self.capacity_mah / average_ma,
            days: self.capacity_mah / mah_per_day,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_reproduces_headline_numbers() {
        let r = BatteryModel::default().estimate().unwrap();
        assert!((r.average_ma - 1.64).abs() < 1e-12);
        assert!((r.active_hours - 240.0 / 1.64).abs() < 1e-9);
        assert!((r.days - 240.0 / (1.64 * 11.0)).abs() < 1e-9);
        assert!((13.25..13.35).contains(&r.days), "{}", r.days);
    }

    #[test]
    fn idle_only_and_linearity() {
        let idle = BatteryModel {
            per_minute: 0.0,
            ..Default::default()
        };
        assert_eq!(idle.average_ma(), 0.96);
        let base = BatteryModel::default().estimate().unwrap().days;
        let doubled = BatteryModel {
            capacity_mah: 480.0,
            ..Default::default()
        };
        assert!((doubled.estimate().unwrap().days - 2.0 * base).abs() < 1e-12);
    }

    #[test]
    fn idle_drain_shortens_life_and_bad_inputs_fail() {
        let drain = BatteryModel {
            idle_drain: true,
            ..Default::default()
        };
        assert!(drain.estimate().unwrap().days < BatteryModel::default().estimate().unwrap().days);
        let empty = BatteryModel {
            capacity_mah: 0.0,
            ..Default::default()
        };
        assert!(matches!(empty.estimate(), Err(Error::InvalidInput(_))));
    }
}
