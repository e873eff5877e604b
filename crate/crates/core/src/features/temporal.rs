//! Whole-signal temporal descriptors.
//!
//! With `x` of length `n`, sampling rate `fs`, `t_i = i / fs` and
//! `d_i = x_{i+1} - x_i`:
//!
//! | name | definition |
//! |---|---|
//! | `autocorr` | first lag (samples) where the mean-removed, lag-0-normalized autocorrelation drops below `1/e`; `n` if it never does; 0 for a constant signal |
//! | `centroid` | `sum t_i x_i^2 / sum x_i^2` (0 when the energy is 0) |
//! | `mean_abs_diff`, `mean_diff` | mean of `abs(d)`, mean of `d` |
//! | `median_abs_diff`, `median_diff` | median of `abs(d)`, median of `d` |
//! | `distance` | `sum sqrt(1 + d_i^2)` |
//! | `sum_abs_diff` | `sum abs(d_i)` |
//! | `total_energy` | `sum x_i^2 / (t_{n-1} - t_0)` |
//! | `entropy` | Shannon entropy of a `ceil(sqrt(n))`-bin histogram, divided by `log2(bins)`; 0 for a constant signal |
//! | `pk_pk_distance` | `abs(argmax - argmin) / fs`, seconds |
//! | `auc` | `sum (t_{i+1} - t_i) abs(x_i + x_{i+1}) / 2` |
//! | `abs_energy` | `sum x_i^2` |
//! | `max_peaks`, `min_peaks` | local maxima of `x` and of `-x` (flat tops count once) |
//! | `slope` | least-squares slope of `x` against sample index |
//! | `zero_cross` | number of sign changes of `x` (`sign(0) = 0`) |

use rustfft::num_complex::Complex;

use super::{FeatureVector, TargetVariant};
use crate::error::{Error, Result};
use crate::signal::fft;
use crate::signal::peaks::local_maxima;

pub const TEMPORAL_NAMES: [&str; 17] = [
    "autocorr",
    "centroid",
    "mean_abs_diff",
    "mean_diff",
    "median_abs_diff",
    "median_diff",
    "distance",
    "sum_abs_diff",
    "total_energy",
    "entropy",
    "pk_pk_distance",
    "auc",
    "abs_energy",
    "max_peaks",
    "min_peaks",
    "slope",
    "zero_cross",
];

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn autocorr_decay_lag(x: &[f64]) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let mut spec = fft::forward(&centered, size);
    for c in spec.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    fft::inverse_in_place(&mut spec);
    let r0 = spec[0].re;
    if r0 <= 0.0 {
        return 0.0;
    }
    let threshold = (-1.0f64).exp();
    (1..n).find(|&k| spec[k].re / r0 < threshold).unwrap_or(n) as f64
}

fn entropy(x: &[f64]) -> f64 {
    let n = x.len();
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi <= lo {
        return 0.0;
    }
    let bins = ((n as f64).sqrt().ceil() as usize).max(2);
    let mut counts = vec![0usize; bins];
    for &v in x {
        let b = (((v - lo) / (hi - lo)) * bins as f64) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum();
    h / (bins as f64).log2()
}

fn slope(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let tm = (n - 1.0) / 2.0;
    let xm = x.iter().sum::<f64>() / n;
    let (num, den) = x.iter().enumerate().fold((0.0, 0.0), |(a, b), (i, v)| {
        let dt = i as f64 - tm;
        (a + dt * (v - xm), b + dt * dt)
    });
    num / den
}

fn zero_cross(x: &[f64]) -> usize {
    let sign = |v: f64| {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    x.windows(2).filter(|w| sign(w[0]) != sign(w[1])).count()
}

/// The 17 descriptors of `x` sampled at `fs` Hz, in [`TEMPORAL_NAMES`] order.
pub fn temporal_features(x: &[f64], fs: f64) -> Result<FeatureVector> {
    let n = x.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "temporal features need at least 2 samples, got {n}"
        )));
    }
    if !(fs > 0.0) {
        return Err(Error::invalid("sampling rate must be positive"));
    }
    let d: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let abs_d: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let energy: f64 = x.iter().map(|v| v * v).sum();
    let t_energy: f64 = x.iter().enumerate().map(|(i, v)| i as f64 / fs * v * v).sum();
    let centroid = if energy == 0.0 || t_energy == 0.0 {
        0.0
    } else {
        t_energy / energy
    };
    let argmax = (0..n).max_by(|&a, &b| x[a].total_cmp(&x[b]).then(b.cmp(&a))).unwrap();
    let argmin = (0..n).min_by(|&a, &b| x[a].total_cmp(&x[b])).unwrap();
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    let auc: f64 = x.windows(2).map(|w| (w[0] + w[1]).abs() / (2.0 * fs)).sum();

    let values = vec![
        autocorr_decay_lag(x),
        centroid,
        abs_d.iter().sum::<f64>() / d.len() as f64,
        d.iter().sum::<f64>() / d.len() as f64,
        median(abs_d.clone()),
        median(d.clone()),
        d.iter().map(|v| (1.0 + v * v).sqrt()).sum(),
        abs_d.iter().sum(),
        energy / ((n - 1) as f64 / fs),
        entropy(x),
        (argmax as f64 - argmin as f64).abs() / fs,
        auc,
        energy,
        local_maxima(x).len() as f64,
        local_maxima(&neg).len() as f64,
        slope(x),
        zero_cross(x) as f64,
    ];
    FeatureVector::new(
        TEMPORAL_NAMES.iter().map(|s| s.to_string()).collect(),
        values,
        TargetVariant::Generic,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn feat(x: &[f64], fs: f64, name: &str) -> f64 {
        temporal_features(x, fs).unwrap().get(name).unwrap()
    }

    #[test]
    fn zero_crossings() {
        assert_eq!(feat(&[1.0, -1.0, 1.0, -1.0], 1.0, "zero_cross"), 3.0);
    }

    #[test]
    fn energies() {
        assert_eq!(feat(&[3.0, 4.0], 1.0, "abs_energy"), 25.0);
        assert_eq!(feat(&[3.0, 4.0], 1.0, "total_energy"), 25.0);
        assert_eq!(feat(&[3.0, 4.0, 0.0], 1.0, "total_energy"), 12.5);
    }

    #[test]
    fn pk_pk_of_one_sine_period() {
        let fs = 1000.0;
        let x: Vec<f64> = (0..1000).map(|i| (2.0 * PI * i as f64 / fs).sin()).collect();
        assert!((feat(&x, fs, "pk_pk_distance") - 0.5).abs() < 1e-9);
    }

    #[test]
    fn simple_descriptors() {
        let x = [0.0, 1.0, 3.0, 2.0];
        let f = temporal_features(&x, 2.0).unwrap();
        assert_eq!(f.get("mean_diff"), Some(2.0 / 3.0));
        assert_eq!(f.get("mean_abs_diff"), Some(4.0 / 3.0));
        assert_eq!(f.get("median_diff"), Some(1.0));
        assert_eq!(f.get("sum_abs_diff"), Some(4.0));
        assert_eq!(f.get("max_peaks"), Some(1.0));
        assert_eq!(f.get("min_peaks"), Some(0.0));
        assert!((f.get("distance").unwrap() - (2f64.sqrt() + 5f64.sqrt() + 2f64.sqrt())).abs() < 1e-12);
        // (0+1)/2*0.5 + (1+3)/2*0.5 + (3+2)/2*0.5
        assert!((f.get("auc").unwrap() - 2.5).abs() < 1e-12);
        assert!((f.get("slope").unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn centroid_and_constant_cases() {
        let x = [0.0, 0.0, 0.0, 2.0];
        assert_eq!(feat(&x, 1.0, "centroid"), 3.0);
        let c = [1.0; 10];
        assert_eq!(feat(&c, 1.0, "entropy"), 0.0);
        assert_eq!(feat(&c, 1.0, "autocorr"), 0.0);
    }

    #[test]
    fn entropy_of_uniform_ramp_is_one() {
        let x: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert!((feat(&x, 1.0, "entropy") - 1.0).abs() < 1e-12);
    }

    #[test]
    fn autocorr_lag_of_slow_sine_exceeds_fast() {
        let s = |f: f64| -> Vec<f64> { (0..2000).map(|i| (2.0 * PI * f * i as f64 / 1000.0).sin()).collect() };
        assert!(feat(&s(2.0), 1000.0, "autocorr") > feat(&s(20.0), 1000.0, "autocorr"));
    }

    #[test]
    fn zcr_scale_invariant_energy_quadratic() {
        let x: Vec<f64> = (0..300).map(|i| (i as f64 * 0.3).sin() + 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let (a, b) = (
            temporal_features(&x, 100.0).unwrap(),
            temporal_features(&y, 100.0).unwrap(),
        );
        assert_eq!(a.get("zero_cross"), b.get("zero_cross"));
        assert!((9.0 * a.get("abs_energy").unwrap() - b.get("abs_energy").unwrap()).abs() < 1e-9);
    }

    #[test]
    fn too_short() {
        assert!(temporal_features(&[1.0], 1.0).is_err());
    }
}
