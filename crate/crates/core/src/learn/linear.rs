use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Ordinary least squares with intercept. Rank-deficient designs get the
/// minimum-norm coefficient vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn fit(x: &[Vec<f64>], y: &[f64]) -> Self {
        let n = y.len();
        let p = x.first().map_or(0, |r| r.len());
        let y_mean = y.iter().sum::<f64>() / n as f64;
        if p == 0 {
            return Self {
                coef: Vec::new(),
                intercept: y_mean,
            };
        }
        let x_mean: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
        let a = DMatrix::from_fn(n, p, |i, j| x[i][j] - x_mean[j]);
        let b = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let tol = smax * n.max(p) as f64 * f64::EPSILON;
        let coef: Vec<f64> = if smax == 0.0 {
            vec![0.0; p]
        } else {
            match svd.solve(&b, tol) {
                Ok(c) => c.iter().copied().collect(),
                Err(_) => vec![0.0; p],
            }
        };
        let intercept = y_mean - coef.iter().zip(&x_mean).map(|(c, m)| c * m).sum::<f64>();
        Self { coef, intercept }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 * 0.37 - 2.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] + 3.0).collect();
        let m = LinearModel::fit(&x, &y);
        assert!((m.coef[0] - 2.0).abs() < 1e-6);
        assert!((m.intercept - 3.0).abs() < 1e-6);
    }

    #[test]
    fn duplicate_columns_split_weight() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, i as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| 4.0 * i as f64).collect();
        let m = LinearModel::fit(&x, &y);
        // Minimum-norm solution spreads the slope evenly.
        assert!((m.coef[0] - 2.0).abs() < 1e-9 && (m.coef[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn constant_target() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let m = LinearModel::fit(&x, &[3.5; 5]);
        assert!((m.predict(&[100.0]) - 3.5).abs() < 1e-9);
    }
}
