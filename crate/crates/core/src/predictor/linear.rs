//! Ridge regression via the closed-form normal equations.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::PredictorError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Ridge fit with an unpenalized intercept.
///
/// The penalty applies to coefficients of standardized features, so it does
/// not depend on feature units (speed in s/token has a variance around
/// 1e-3 and would otherwise be shrunk far more than the binary flags).
/// Constant features get weight 0 when `lambda > 0`.
pub fn fit(inputs: &[Vec<f64>], targets: &[f64], lambda: f64) -> Result<LinearModel, PredictorError> {
    let n = inputs.len();
    let d = inputs.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(PredictorError::EmptyTrain);
    }
    let nf = n as f64;
    let mean_x: Vec<f64> = (0..d).map(|j| inputs.iter().map(|x| x[j]).sum::<f64>() / nf).collect();
    let sd_x: Vec<f64> = (0..d)
        .map(|j| libm::sqrt(inputs.iter().map(|x| (x[j] - mean_x[j]) * (x[j] - mean_x[j])).sum::<f64>() / nf))
        .collect();
    let mean_y = targets.iter().sum::<f64>() / nf;
    let z = |x: &[f64], j: usize| if sd_x[j] > 0.0 { (x[j] - mean_x[j]) / sd_x[j] } else { 0.0 };

    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for (x, &y) in inputs.iter().zip(targets) {
        let zx: Vec<f64> = (0..d).map(|j| z(x, j)).collect();
        for i in 0..d {
            b[i] += zx[i] * (y - mean_y);
            for j in i..d {
                a[i][j] += zx[i] * zx[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            a[i][j] = a[j][i];
        }
        a[i][i] += lambda;
    }
    let beta = if d == 0 { Vec::new() } else { solve(a, b).ok_or(PredictorError::SingularSystem)? };
    let weights: Vec<f64> =
        beta.iter().zip(&sd_x).map(|(bj, sj)| if *sj > 0.0 { bj / sj } else { 0.0 }).collect();
    let intercept = mean_y - weights.iter().zip(&mean_x).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearModel { intercept, weights })
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}
