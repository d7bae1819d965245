use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Bounds, N_PARAMS};

/// Murray-exponent prior mean and standard deviation.
pub const ETA_PRIOR: (f64, f64) = (2.13, 0.37);
/// Length-to-radius prior mean and standard deviation.
pub const LRR_PRIOR: (f64, f64) = (10.7, 8.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorKind {
    TruncatedGaussian { mean: f64, sd: f64, lo: f64, hi: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl PriorKind {
    fn support(&self) -> (f64, f64) {
        match *self {
            Self::TruncatedGaussian { lo, hi, .. } | Self::Uniform { lo, hi } => (lo, hi),
        }
    }

    /// Unnormalized for the truncated Gaussian; −∞ outside the support.
    pub fn log_density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x >= lo && x <= hi) {
            return f64::NEG_INFINITY;
        }
        match *self {
            Self::TruncatedGaussian { mean, sd, .. } => -0.5 * ((x - mean) / sd).powi(2),
            Self::Uniform { lo, hi } => -(hi - lo).ln(),
        }
    }

    /// Prior mean clipped into the support, or the interval center.
    pub fn initial(&self) -> f64 {
        match *self {
            Self::TruncatedGaussian { mean, lo, hi, .. } => mean.clamp(lo, hi),
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.support();
        if !(lo < hi) {
            return Err(Error::InvalidInput(format!("prior support [{lo}, {hi}] is empty")));
        }
        if let Self::TruncatedGaussian { sd, mean, .. } = *self {
            if !(sd > 0.0) || !mean.is_finite() {
                return Err(Error::InvalidInput("Gaussian prior needs finite mean and positive sd".into()));
            }
        }
        Ok(())
    }
}

/// Which family to place on every parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PriorFamily {
    #[default]
    Gaussian,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub params: Vec<PriorKind>,
}

impl PriorSpec {
    pub fn new(params: Vec<PriorKind>) -> Result<Self> {
        for p in &params {
            p.validate()?;
        }
        Ok(Self { params })
    }

    /// η and lrr Gaussians for both lungs, truncated to `bounds` (ordered η_L, lrr_L, η_R, lrr_R).
    pub fn gaussian(bounds: &[Bounds]) -> Result<Self> {
        check_len(bounds)?;
        Self::new(
            bounds
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let (mean, sd) = if i % 2 == 0 { ETA_PRIOR } else { LRR_PRIOR };
                    PriorKind::TruncatedGaussian {
                        mean,
                        sd,
                        lo: b.lo,
                        hi: b.hi,
                    }
                })
                .collect(),
        )
    }

    pub fn uniform(bounds: &[Bounds]) -> Result<Self> {
        Self::new(bounds.iter().map(|b| PriorKind::Uniform { lo: b.lo, hi: b.hi }).collect())
    }

    pub fn from_family(family: PriorFamily, bounds: &[Bounds]) -> Result<Self> {
        match family {
            PriorFamily::Gaussian => Self::gaussian(bounds),
            PriorFamily::Uniform => Self::uniform(bounds),
        }
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn log_prior(&self, theta: &[f64]) -> f64 {
        if theta.len() != self.params.len() {
            return f64::NEG_INFINITY;
        }
        self.params.iter().zip(theta).map(|(p, &x)| p.log_density(x)).sum()
    }

    pub fn initial(&self) -> Vec<f64> {
        self.params.iter().map(PriorKind::initial).collect()
    }

    pub fn ranges(&self) -> Vec<f64> {
        self.params
            .iter()
            .map(|p| {
                let (lo, hi) = p.support();
                hi - lo
            })
            .collect()
    }
}

fn check_len(bounds: &[Bounds]) -> Result<()> {
    if bounds.len() != N_PARAMS {
        return Err(Error::InvalidInput(format!("expected {N_PARAMS} bounds, got {}", bounds.len())));
    }
    Ok(())
}
