use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{validate_bounds, Bounds};

/// Stratified samples of the parameter box, one row per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub points: Vec<Vec<f64>>,
    pub bounds: Vec<Bounds>,
}

impl DesignMatrix {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Stratum index of every entry in column `k`.
    pub fn strata(&self, k: usize) -> Vec<usize> {
        let n = self.points.len();
        let b = self.bounds[k];
        self.points
            .iter()
            .map(|p| (((p[k] - b.lo) / b.width() * n as f64).floor() as usize).min(n - 1))
            .collect()
    }
}

/// Latin hypercube: each column takes one uniform draw from each of n equal
/// strata, in an independently shuffled order.
pub fn lhs_design(bounds: &[Bounds], n: usize, seed: u64) -> Result<DesignMatrix> {
    if n < 2 {
        return Err(Error::InvalidInput("a design needs at least two points".into()));
    }
    validate_bounds(bounds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![vec![0.0; bounds.len()]; n];
    let mut order: Vec<usize> = (0..n).collect();
    for (k, b) in bounds.iter().enumerate() {
        order.shuffle(&mut rng);
        for (row, &stratum) in points.iter_mut().zip(&order) {
            let u: f64 = rng.random();
            row[k] = (b.lo + (stratum as f64 + u) / n as f64 * b.width()).clamp(b.lo, b.hi);
        }
    }
    Ok(DesignMatrix {
        points,
        bounds: bounds.to_vec(),
    })
}
