use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-coordinate affine map of the fitted range onto [0, 1].
///
/// Coordinates that never vary keep unit span so the map stays invertible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub lo: Vec<f64>,
    pub span: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::InvalidInput("cannot fit a scaler to no rows".into()))?;
        let d = first.len();
        let mut lo = first.clone();
        let mut hi = first.clone();
        for r in rows {
            if r.len() != d {
                return Err(Error::InvalidInput("rows of unequal length".into()));
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("non-finite value in scaler input".into()));
            }
            for k in 0..d {
                lo[k] = lo[k].min(r[k]);
                hi[k] = hi[k].max(r[k]);
            }
        }
        let span = lo.iter().zip(&hi).map(|(l, h)| if h > l { h - l } else { 1.0 }).collect();
        Ok(Self { lo, span })
    }

    /// Fixed ranges, e.g. the design box for inputs.
    pub fn from_ranges(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        let span = lo.iter().zip(&hi).map(|(l, h)| if h > l { h - l } else { 1.0 }).collect();
        Self { lo, span }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn scale(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.lo.iter().zip(&self.span)).map(|(v, (l, s))| (v - l) / s).collect()
    }

    pub fn unscale(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(self.lo.iter().zip(&self.span)).map(|(v, (l, s))| v * s + l).collect()
    }

    /// Scale factor of coordinate k, for mapping variances.
    pub fn span(&self, k: usize) -> f64 {
        self.span[k]
    }
}
