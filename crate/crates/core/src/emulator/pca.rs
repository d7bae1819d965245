use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;

/// Eigenvalues below this fraction of the largest count as zero.
const RANK_TOL: f64 = 1e-13;

/// Principal-component reduction of output vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaReduction {
    pub mean: Vec<f64>,
    /// Orthonormal components, sorted by decreasing eigenvalue.
    pub basis: Vec<Vec<f64>>,
    /// Every covariance eigenvalue, sorted decreasing.
    pub eigenvalues: Vec<f64>,
}

impl PcaReduction {
    pub fn n_components(&self) -> usize {
        self.basis.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Fraction of total variance carried by each retained component.
    pub fn explained(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().map(|l| l.max(0.0)).sum();
        self.eigenvalues[..self.n_components()].iter().map(|l| l.max(0.0) / total).collect()
    }

    pub fn cumulative_explained(&self) -> f64 {
        self.explained().iter().sum()
    }

    pub fn scores(&self, y: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = y.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        self.basis.iter().map(|b| dot(b, &centered)).collect()
    }

    /// ȳ + Σ cᵢ ξᵢ
    pub fn reconstruct(&self, scores: &[f64]) -> Vec<f64> {
        let mut y = self.mean.clone();
        for (c, b) in scores.iter().zip(&self.basis) {
            for (yi, bi) in y.iter_mut().zip(b) {
                *yi += c * bi;
            }
        }
        y
    }
}

/// Eigendecomposition of the sample covariance of `y` (rows are samples).
///
/// Keeps `n_fixed` components if given, otherwise the fewest reaching
/// `variance_target`.
pub fn fit_pca(y: &[Vec<f64>], variance_target: f64, n_fixed: Option<usize>) -> Result<PcaReduction> {
    let n = y.len();
    if n < 2 {
        return Err(Error::InvalidInput("PCA needs at least two samples".into()));
    }
    let d = y[0].len();
    if y.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidInput("PCA rows of unequal length".into()));
    }
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::InvalidInput("variance target must lie in (0, 1]".into()));
    }
    let mut mean = vec![0.0; d];
    for r in y {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, d, |i, j| y[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    let largest = eigenvalues[0].max(0.0);
    let rank = eigenvalues.iter().filter(|&&l| l > RANK_TOL * largest && largest > 0.0).count();
    let total: f64 = eigenvalues.iter().map(|l| l.max(0.0)).sum();
    let count = match n_fixed {
        Some(k) => {
            if k == 0 || k > d {
                return Err(Error::InvalidInput(format!("component count {k} outside 1..={d}")));
            }
            if k > rank {
                return Err(Error::InvalidInput(format!(
                    "requested {k} components but the data have rank {rank}"
                )));
            }
            k
        }
        None => {
            if rank == 0 {
                return Err(Error::InvalidInput("outputs do not vary".into()));
            }
            let mut acc = 0.0;
            let mut k = 0;
            while k < d {
                acc += eigenvalues[k].max(0.0) / total;
                k += 1;
                if acc >= variance_target {
                    break;
                }
            }
            k
        }
    };

    let basis = order[..count]
        .iter()
        .map(|&i| {
            let v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            // Fix the sign so the largest-magnitude entry is positive.
            let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if pivot < 0.0 {
                v.iter().map(|x| -x).collect()
            } else {
                v
            }
        })
        .collect();
    Ok(PcaReduction {
        mean,
        basis,
        eigenvalues,
    })
}
