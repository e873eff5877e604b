//! Epsilon-insensitive support vector regression.
//!
//! The dual is solved over `2l` variables (`alpha` then `alpha*`) by
//! sequential minimal optimization with second-order working-set selection,
//! following the libsvm solver without shrinking. Inputs are z-scored with
//! training statistics before the kernel is applied.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf,
    Poly,
}

impl Kernel {
    pub const ALL: [Kernel; 3] = [Kernel::Linear, Kernel::Rbf, Kernel::Poly];

    pub fn as_str(&self) -> &'static str {
        match self {
            Kernel::Linear => "linear",
            Kernel::Rbf => "rbf",
            Kernel::Poly => "poly",
        }
    }
}

pub const POLY_DEGREE: i32 = 3;
pub const POLY_COEF0: f64 = 1.0;
const TAU: f64 = 1e-12;
const TOLERANCE: f64 = 1e-3;
const MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub kernel: Kernel,
    pub gamma: f64,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub support: Vec<Vec<f64>>,
    /// `alpha_i - alpha*_i` for each support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
}

fn kernel(k: Kernel, gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    match k {
        Kernel::Linear => dot(a, b),
        Kernel::Rbf => (-gamma * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).exp(),
        Kernel::Poly => (gamma * dot(a, b) + POLY_COEF0).powi(POLY_DEGREE),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SvrModel {
    pub fn fit(x: &[Vec<f64>], y: &[f64], c: f64, kern: Kernel, epsilon: f64) -> Self {
        let l = y.len();
        let p = x.first().map_or(0, |r| r.len());
        let mean: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / l as f64).collect();
        let scale: Vec<f64> = (0..p)
            .map(|j| {
                let v = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / l as f64;
                if v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let z: Vec<Vec<f64>> = x
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| (v - mean[j]) / scale[j]).collect())
            .collect();
        let gamma = 1.0 / p.max(1) as f64;

        let k: Vec<Vec<f64>> = (0..l)
            .map(|i| (0..l).map(|j| kernel(kern, gamma, &z[i], &z[j])).collect())
            .collect();
        let n = 2 * l;
        let sign = |t: usize| if t < l { 1.0 } else { -1.0 };
        let q = |a: usize, b: usize| sign(a) * sign(b) * k[a % l][b % l];
        let qd: Vec<f64> = (0..n).map(|t| k[t % l][t % l]).collect();
        let mut alpha = vec![0.0; n];
        let mut g: Vec<f64> = (0..n)
            .map(|t| if t < l { epsilon - y[t] } else { epsilon + y[t - l] })
            .collect();

        let upper = |a: f64| a >= c;
        let lower = |a: f64| a <= 0.0;
        for _ in 0..MAX_ITER {
            // Maximal violating i, then j by the second-order gain.
            let mut gmax = f64::NEG_INFINITY;
            let mut i = usize::MAX;
            for t in 0..n {
                if sign(t) > 0.0 {
                    if !upper(alpha[t]) && -g[t] >= gmax {
                        gmax = -g[t];
                        i = t;
                    }
                } else if !lower(alpha[t]) && g[t] >= gmax {
                    gmax = g[t];
                    i = t;
                }
            }
            if i == usize::MAX {
                break;
            }
            let mut gmax2 = f64::NEG_INFINITY;
            let mut j = usize::MAX;
            let mut obj_min = f64::INFINITY;
            for t in 0..n {
                let (grad_diff, quad) = if sign(t) > 0.0 {
                    if lower(alpha[t]) {
                        continue;
                    }
                    gmax2 = gmax2.max(g[t]);
                    (gmax + g[t], qd[i] + qd[t] - 2.0 * sign(i) * q(i, t))
                } else {
                    if upper(alpha[t]) {
                        continue;
                    }
                    gmax2 = gmax2.max(-g[t]);
                    (gmax - g[t], qd[i] + qd[t] + 2.0 * sign(i) * q(i, t))
                };
                if grad_diff > 0.0 {
                    let obj = -(grad_diff * grad_diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= obj_min {
                        obj_min = obj;
                        j = t;
                    }
                }
            }
            if j == usize::MAX || gmax + gmax2 < TOLERANCE {
                break;
            }

            let (old_i, old_j) = (alpha[i], alpha[j]);
            let qij = q(i, j);
            if sign(i) != sign(j) {
                let quad = (qd[i] + qd[j] + 2.0 * qij).max(TAU);
                let delta = (-g[i] - g[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = (qd[i] + qd[j] - 2.0 * qij).max(TAU);
                let delta = (g[i] - g[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for (t, gt) in g.iter_mut().enumerate() {
                *gt += q(i, t) * di + q(j, t) * dj;
            }
        }

        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut free_sum, mut free) = (0.0, 0usize);
        for t in 0..n {
            let yg = sign(t) * g[t];
            if upper(alpha[t]) {
                if sign(t) < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if lower(alpha[t]) {
                if sign(t) > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                free_sum += yg;
            }
        }
        let rho = if free > 0 {
            free_sum / free as f64
        } else {
            0.5 * (ub + lb)
        };

        let mut support = Vec::new();
        let mut coef = Vec::new();
        for s in 0..l {
            let b = alpha[s] - alpha[s + l];
            if b != 0.0 {
                support.push(z[s].clone());
                coef.push(b);
            }
        }
        Self {
            kernel: kern,
            gamma,
            mean,
            scale,
            support,
            coef,
            rho,
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let z: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(j, v)| (v - self.mean[j]) / self.scale[j])
            .collect();
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, b)| b * kernel(self.kernel, self.gamma, s, &z))
            .sum::<f64>()
            - self.rho
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target_all_kernels() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        for k in Kernel::ALL {
            let m = SvrModel::fit(&x, &[4.2; 12], 10.0, k, 0.1);
            assert!((m.predict(&[50.0, -3.0]) - 4.2).abs() < 1e-6, "{k:?}");
        }
    }

    #[test]
    fn linear_kernel_fits_within_tube() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 10.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 * r[0] + 1.0).collect();
        let m = SvrModel::fit(&x, &y, 100.0, Kernel::Linear, 0.1);
        for (r, t) in x.iter().zip(&y) {
            assert!((m.predict(r) - t).abs() <= 0.1 + 2e-3);
        }
    }

    #[test]
    fn rbf_tracks_nonlinear_curve() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 8.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 + r[0].sin()).collect();
        let m = SvrModel::fit(&x, &y, 100.0, Kernel::Rbf, 0.05);
        let mse = x.iter().zip(&y).map(|(r, t)| (m.predict(r) - t).powi(2)).sum::<f64>() / 40.0;
        assert!(mse < 0.01, "{mse}");
    }
}
