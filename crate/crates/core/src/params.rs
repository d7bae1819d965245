//! The inferred microvascular parameter set and its sampling bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of inferred parameters.
pub const N_PARAMS: usize = 4;

/// Column names in the canonical order used by designs, emulators and chains.
pub const PARAM_NAMES: [&str; N_PARAMS] = ["eta_l", "lrr_l", "eta_r", "lrr_r"];

/// Murray exponent and length-to-radius ratio for each lung.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub eta_l: f64,
    pub lrr_l: f64,
    pub eta_r: f64,
    pub lrr_r: f64,
}

impl ParameterVector {
    pub fn new(eta_l: f64, lrr_l: f64, eta_r: f64, lrr_r: f64) -> Self {
        Self {
            eta_l,
            lrr_l,
            eta_r,
            lrr_r,
        }
    }

    pub fn to_array(self) -> [f64; N_PARAMS] {
        [self.eta_l, self.lrr_l, self.eta_r, self.lrr_r]
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        match x {
            [a, b, c, d] => Ok(Self::new(*a, *b, *c, *d)),
            _ => Err(Error::InvalidInput(format!("expected {N_PARAMS} parameters, got {}", x.len()))),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Closed interval per parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Sampling box: η ∈ [1.5, 3], lrr ∈ [2, 70] for both lungs.
pub const DEFAULT_BOUNDS: [Bounds; N_PARAMS] = [
    Bounds::new(1.5, 3.0),
    Bounds::new(2.0, 70.0),
    Bounds::new(1.5, 3.0),
    Bounds::new(2.0, 70.0),
];

pub fn within(bounds: &[Bounds], x: &[f64]) -> bool {
    bounds.len() == x.len() && bounds.iter().zip(x).all(|(b, &v)| b.contains(v))
}

pub fn validate_bounds(bounds: &[Bounds]) -> Result<()> {
    for (i, b) in bounds.iter().enumerate() {
        if !(b.lo < b.hi) || !b.lo.is_finite() || !b.hi.is_finite() {
            return Err(Error::InvalidInput(format!("bound {i}: lo {} must be below hi {}", b.lo, b.hi)));
        }
    }
    Ok(())
}
