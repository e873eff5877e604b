//! Peak picking with minimum-distance and prominence constraints.
//!
//! Semantics follow the common `find_peaks` convention: flat tops report
//! their midpoint, the distance constraint keeps taller peaks first, and the
//! prominence of a peak is its height above the higher of the two lowest
//! points reached before the signal climbs above the peak on either side.

use serde::{Deserialize, Serialize};

use super::Envelope;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub indices: Vec<usize>,
    pub mean_peak_to_peak_s: f64,
    pub sample_rate_hz: u32,
}

impl PeakSet {
    pub fn from_indices(indices: Vec<usize>, sample_rate_hz: u32) -> Result<Self> {
        if indices.len() < 2 {
            return Err(Error::InsufficientPeaks { found: indices.len() });
        }
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("peak indices must be strictly increasing"));
        }
        let span = (indices[indices.len() - 1] - indices[0]) as f64;
        let mean_gap = span / (indices.len() - 1) as f64 / sample_rate_hz as f64;
        Ok(Self {
            indices,
            mean_peak_to_peak_s: mean_gap,
            sample_rate_hz,
        })
    }

    pub fn times_s(&self) -> Vec<f64> {
        self.indices
            .iter()
            .map(|&i| i as f64 / self.sample_rate_hz as f64)
            .collect()
    }
}

pub(crate) fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    let n = x.len();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead + 1 < n && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                peaks.push((i + ahead - 1) / 2);
                i = ahead;
            }
        }
        i += 1;
    }
    peaks
}

fn prominence(x: &[f64], peak: usize) -> f64 {
    let h = x[peak];
    let mut left_min = h;
    for &v in x[..peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

fn enforce_distance(x: &[f64], peaks: &[usize], distance: usize) -> Vec<usize> {
    let mut keep = vec![true; peaks.len()];
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    // Tallest first; ties resolved toward the later peak, as a stable ascending sort walked backwards would.
    order.sort_by(|&a, &b| x[peaks[b]].total_cmp(&x[peaks[a]]).then(b.cmp(&a)));
    for &i in &order {
        if !keep[i] {
            continue;
        }
        let mut j = i;
        while j > 0 && peaks[i] - peaks[j - 1] < distance {
            j -= 1;
            keep[j] = false;
        }
        let mut j = i + 1;
        while j < peaks.len() && peaks[j] - peaks[i] < distance {
            keep[j] = false;
            j += 1;
        }
    }
    peaks.iter().zip(keep).filter_map(|(&p, k)| k.then_some(p)).collect()
}

/// Indices of peaks of `x` at least `distance` samples apart with
/// prominence of at least `min_prominence`.
pub fn find_peaks(x: &[f64], distance: usize, min_prominence: f64) -> Vec<usize> {
    let peaks = local_maxima(x);
    let peaks = if distance > 1 {
        enforce_distance(x, &peaks, distance)
    } else {
        peaks
    };
    peaks
        .into_iter()
        .filter(|&p| prominence(x, p) >= min_prominence)
        .collect()
}

/// Peaks of an envelope. Fewer than two surviving peaks is an error, so a
/// caller estimating a rate can treat it as a rejection.
pub fn detect_peaks(env: &Envelope, min_separation_s: f64, min_prominence: f64) -> Result<PeakSet> {
    if env.is_empty() {
        return Err(Error::invalid("envelope is empty"));
    }
    if !(min_separation_s >= 0.0) || !(min_prominence >= 0.0) {
        return Err(Error::invalid("separation and prominence must be nonnegative"));
    }
    let distance = ((min_separation_s * env.sample_rate_hz() as f64).round() as usize).max(1);
    let mut peaks = find_peaks(env.values(), distance, min_prominence);
    // A flat envelope has no local maxima; guard anyway against zero-height "peaks".
    peaks.retain(|&p| env.values()[p] > 0.0);
    PeakSet::from_indices(peaks, env.sample_rate_hz())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn env(values: Vec<f64>, rate: u32) -> Envelope {
        Envelope::new(values, rate).unwrap()
    }

    #[test]
    fn rectified_sine_with_four_second_period() {
        let rate = 100;
        let x: Vec<f64> = (0..20 * rate)
            .map(|i| (PI * i as f64 / rate as f64 / 4.0).sin().abs())
            .collect();
        let p = detect_peaks(&env(x, rate as u32), 1.5, 0.05).unwrap();
        assert_eq!(p.indices.len(), 5);
        assert!((p.mean_peak_to_peak_s - 4.0).abs() < 1e-9);
    }

    #[test]
    fn rectified_sine_as_literally_written_has_two_second_period() {
        // |sin(2 pi t / 4)| repeats every 2 s.
        let rate = 100;
        let x: Vec<f64> = (0..20 * rate)
            .map(|i| (2.0 * PI * i as f64 / rate as f64 / 4.0).sin().abs())
            .collect();
        let p = detect_peaks(&env(x, rate as u32), 1.5, 0.05).unwrap();
        assert_eq!(p.indices.len(), 10);
        assert!((p.mean_peak_to_peak_s - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_envelope_has_no_peaks() {
        let r = detect_peaks(&env(vec![0.0; 2000], 100), 1.5, 0.0);
        assert!(matches!(r, Err(Error::InsufficientPeaks { found: 0 })));
    }

    #[test]
    fn two_gaussian_bumps() {
        let rate = 100;
        let bump = |t: f64, c: f64| (-((t - c) / 0.3).powi(2)).exp();
        let x: Vec<f64> = (0..1000)
            .map(|i| {
                let t = i as f64 / rate as f64;
                bump(t, 3.0) + bump(t, 6.0)
            })
            .collect();
        let p = detect_peaks(&env(x, rate), 1.5, 0.05).unwrap();
        assert_eq!(p.indices, vec![300, 600]);
        assert!((p.mean_peak_to_peak_s - 3.0).abs() < 1e-9);
    }

    #[test]
    fn plateau_reports_midpoint() {
        let x = [0.0, 1.0, 2.0, 2.0, 2.0, 1.0, 0.0];
        assert_eq!(find_peaks(&x, 1, 0.0), vec![3]);
    }

    #[test]
    fn distance_keeps_tallest() {
        let x = [0.0, 1.0, 0.0, 3.0, 0.0, 2.0, 0.0];
        assert_eq!(find_peaks(&x, 3, 0.0), vec![3]);
        assert_eq!(find_peaks(&x, 2, 0.0), vec![1, 3, 5]);
    }

    #[test]
    fn prominence_filters_ripples() {
        let x = [0.0, 5.0, 4.8, 4.9, 0.0, 3.0, 0.0];
        // The 4.9 ripple rises only 0.1 above its saddle.
        assert_eq!(find_peaks(&x, 1, 0.5), vec![1, 5]);
        assert!((prominence(&x, 3) - 0.1).abs() < 1e-12);
    }
}
