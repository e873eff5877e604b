use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|(v_a - v_e) / v_a| * 100`, with `v_a` the reference value.
pub fn percentage_error(v_a: f64, v_e: f64) -> Result<f64> {
    if v_a == 0.0 {
        return Err(Error::invalid("percentage error of a zero reference"));
    }
    Ok(((v_a - v_e) / v_a).abs() * 100.0)
}

/// Agreement statistics with differences `estimate - truth`; input pairs
/// are `(truth, estimate)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlandAltman {
    pub mean_diff: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd_diff: f64,
    pub lower: f64,
    pub upper: f64,
    /// `(mean of pair, difference)` per input pair.
    pub points: Vec<(f64, f64)>,
}

pub fn bland_altman(pairs: &[(f64, f64)]) -> Result<BlandAltman> {
    if pairs.len() < 2 {
        return Err(Error::invalid(format!(
            "Bland-Altman needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let points: Vec<(f64, f64)> = pairs.iter().map(|&(t, e)| (0.5 * (t + e), e - t)).collect();
    let mean_diff = points.iter().map(|p| p.1).sum::<f64>() / n;
    let var = points.iter().map(|p| (p.1 - mean_diff).powi(2)).sum::<f64>() / (n - 1.0);
    let sd_diff = var.sqrt();
    Ok(BlandAltman {
        mean_diff,
        sd_diff,
        lower: mean_diff - 2.0 * sd_diff,
        upper: mean_diff + 2.0 * sd_diff,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentage_error_examples() {
        assert_eq!(percentage_error(4.0, 4.0).unwrap(), 0.0);
        assert_eq!(percentage_error(2.0, 1.0).unwrap(), 50.0);
        assert_eq!(percentage_error(1.0, 2.0).unwrap(), 100.0);
        assert!(percentage_error(0.0, 1.0).is_err());
    }

    #[test]
    fn bland_altman_examples() {
        let same = bland_altman(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]).unwrap();
        assert_eq!((same.mean_diff, same.sd_diff), (0.0, 0.0));
        let shifted = bland_altman(&[(1.0, 2.0), (2.5, 3.5), (3.0, 4.0)]).unwrap();
        assert_eq!((shifted.mean_diff, shifted.sd_diff), (1.0, 0.0));
        assert_eq!(shifted.points[1], (3.0, 1.0));
        assert!(bland_altman(&[(1.0, 1.0)]).is_err());
    }
}
