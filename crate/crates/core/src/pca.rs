//! Covariance, symmetric eigendecomposition by cyclic Jacobi rotations, and
//! principal component analysis of standardized samples.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub type Matrix = Vec<Vec<f64>>;

/// Sweeps stop once the off-diagonal Frobenius norm falls below this
/// (relative to the matrix norm when that exceeds 1).
pub const JACOBI_TOLERANCE: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PcaError {
    #[error("too-few-samples: need at least 2, got {0}")]
    TooFewSamples(usize),
    #[error("ragged samples: expected width {expected}, found {found}")]
    Ragged { expected: usize, found: usize },
    #[error("zero-variance: every feature is constant")]
    ZeroVariance,
    #[error("matrix is not square")]
    NotSquare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    pub mean: Vec<f64>,
    pub matrix: Matrix,
}

fn width<S: AsRef<[f64]>>(samples: &[S]) -> Result<usize, PcaError> {
    if samples.len() < 2 {
        return Err(PcaError::TooFewSamples(samples.len()));
    }
    let d = samples[0].as_ref().len();
    for s in samples {
        if s.as_ref().len() != d {
            return Err(PcaError::Ragged { expected: d, found: s.as_ref().len() });
        }
    }
    Ok(d)
}

/// Sample mean and covariance with divisor n.
pub fn covariance<S: AsRef<[f64]>>(samples: &[S]) -> Result<Covariance, PcaError> {
    let d = width(samples)?;
    let n = samples.len() as f64;
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s.as_ref()) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut matrix = vec![vec![0.0; d]; d];
    for s in samples {
        let dev: Vec<f64> = s.as_ref().iter().zip(&mean).map(|(x, m)| x - m).collect();
        for i in 0..d {
            for j in i..d {
                matrix[i][j] += dev[i] * dev[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            matrix[i][j] /= n;
            matrix[j][i] = matrix[i][j];
        }
    }
    Ok(Covariance { mean, matrix })
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let mut s = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if i != j {
                s += v * v;
            }
        }
    }
    libm::sqrt(s)
}

fn frobenius(a: &Matrix) -> f64 {
    libm::sqrt(a.iter().flatten().map(|v| v * v).sum())
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
/// `vectors[k]` is the unit eigenvector of `values[k]`, with its
/// largest-magnitude entry non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

pub fn jacobi_eigen(input: &Matrix) -> Result<Eigen, PcaError> {
    let n = input.len();
    if input.iter().any(|r| r.len() != n) {
        return Err(PcaError::NotSquare);
    }
    let mut a = input.clone();
    // columns of v accumulate the rotations
    let mut v: Matrix = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let tol = JACOBI_TOLERANCE * frobenius(&a).max(1.0);

    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) < tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&col| {
            let mut w: Vec<f64> = v.iter().map(|row| row[col]).collect();
            let lead = w
                .iter()
                .copied()
                .fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
            if lead < 0.0 {
                for x in &mut w {
                    *x = -*x;
                }
            }
            w
        })
        .collect();
    Ok(Eigen { values, vectors })
}

/// Rebuilds `V diag(values) V^T` from eigenpairs.
pub fn reconstruct(e: &Eigen) -> Matrix {
    let n = e.values.len();
    let mut m = vec![vec![0.0; n]; n];
    for (lambda, w) in e.values.iter().zip(&e.vectors) {
        for i in 0..n {
            for j in 0..n {
                m[i][j] += lambda * w[i] * w[j];
            }
        }
    }
    m
}

pub fn explained_variance_ratio(eigenvalues: &[f64]) -> Result<Vec<f64>, PcaError> {
    let total: f64 = eigenvalues.iter().sum();
    if !(total > 0.0) {
        return Err(PcaError::ZeroVariance);
    }
    Ok(eigenvalues.iter().map(|l| l / total).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// Per-feature mean of the raw samples.
    pub mean: Vec<f64>,
    /// Per-feature population standard deviation used for standardization
    /// (0 for constant features, which standardize to 0).
    pub scale: Vec<f64>,
    /// Covariance of the standardized samples.
    pub covariance: Matrix,
    pub eigenvalues: Vec<f64>,
    /// Loadings, one row per component, columns in feature order.
    pub components: Matrix,
    pub explained_variance_ratio: Vec<f64>,
    /// Projections of each standardized sample, one row per sample.
    pub scores: Matrix,
}

impl PcaResult {
    /// Standardizes a raw sample with the fitted mean and scale.
    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| if *s > 0.0 { (x - m) / s } else { 0.0 })
            .collect()
    }

    /// Scores of an already standardized sample.
    pub fn project(&self, standardized: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|w| w.iter().zip(standardized).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// PCA on samples standardized to zero mean and unit variance per feature.
pub fn pca<S: AsRef<[f64]>>(samples: &[S]) -> Result<PcaResult, PcaError> {
    let raw = covariance(samples)?;
    let scale: Vec<f64> = (0..raw.mean.len()).map(|i| libm::sqrt(raw.matrix[i][i])).collect();
    let mean = raw.mean;
    let mut partial = PcaResult {
        mean,
        scale,
        covariance: Vec::new(),
        eigenvalues: Vec::new(),
        components: Vec::new(),
        explained_variance_ratio: Vec::new(),
        scores: Vec::new(),
    };
    let standardized: Vec<Vec<f64>> = samples.iter().map(|s| partial.standardize(s.as_ref())).collect();
    let cov = covariance(&standardized)?;
    let eig = jacobi_eigen(&cov.matrix)?;
    let ratio = explained_variance_ratio(&eig.values)?;
    partial.covariance = cov.matrix;
    partial.eigenvalues = eig.values;
    partial.components = eig.vectors;
    partial.explained_variance_ratio = ratio;
    partial.scores = standardized.iter().map(|x| partial.project(x)).collect();
    Ok(partial)
}
