use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{LIKELIHOOD_LEN, N_SAMPLES};

/// Data sources, each with its own measurement variance.
pub const SOURCES: [&str; 4] = ["pressure", "lpa_flow", "rpa_flow", "strain"];
/// Entries per source in the likelihood vector.
pub const SOURCE_SIZES: [usize; 4] = [2, N_SAMPLES, N_SAMPLES, N_SAMPLES];

/// Index range of source `s` in the likelihood vector.
pub fn source_range(s: usize) -> std::ops::Range<usize> {
    let start: usize = SOURCE_SIZES[..s].iter().sum();
    start..start + SOURCE_SIZES[s]
}

/// Source owning entry `i` of the likelihood vector.
pub fn source_of(i: usize) -> usize {
    let mut end = 0;
    for (s, n) in SOURCE_SIZES.iter().enumerate() {
        end += n;
        if i < end {
            return s;
        }
    }
    SOURCE_SIZES.len() - 1
}

/// Measured data in likelihood layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationVector {
    /// mmHg
    pub p_sys: f64,
    /// mmHg
    pub p_dia: f64,
    /// mL/s
    pub q_lpa: Vec<f64>,
    /// mL/s
    pub q_rpa: Vec<f64>,
    /// Percent area change relative to diastole.
    pub strain: Vec<f64>,
}

impl ObservationVector {
    pub fn new(p_sys: f64, p_dia: f64, q_lpa: Vec<f64>, q_rpa: Vec<f64>, strain: Vec<f64>) -> Result<Self> {
        let o = Self {
            p_sys,
            p_dia,
            q_lpa,
            q_rpa,
            strain,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn from_vector(v: &[f64]) -> Result<Self> {
        if v.len() != LIKELIHOOD_LEN {
            return Err(Error::InvalidInput(format!(
                "observation vector needs {LIKELIHOOD_LEN} entries, got {}",
                v.len()
            )));
        }
        Self::new(
            v[0],
            v[1],
            v[source_range(1)].to_vec(),
            v[source_range(2)].to_vec(),
            v[source_range(3)].to_vec(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_sys > self.p_dia) {
            return Err(Error::InvalidInput(format!(
                "systolic pressure {} must exceed diastolic {}",
                self.p_sys, self.p_dia
            )));
        }
        for (name, v) in [("q_lpa", &self.q_lpa), ("q_rpa", &self.q_rpa), ("strain", &self.strain)] {
            if v.len() != N_SAMPLES {
                return Err(Error::InvalidInput(format!("{name} needs {N_SAMPLES} samples, got {}", v.len())));
            }
        }
        if self.to_vector().iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("observations must be finite".into()));
        }
        Ok(())
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(LIKELIHOOD_LEN);
        v.push(self.p_sys);
        v.push(self.p_dia);
        v.extend_from_slice(&self.q_lpa);
        v.extend_from_slice(&self.q_rpa);
        v.extend_from_slice(&self.strain);
        v
    }

    pub fn len(&self) -> usize {
        2 + self.q_lpa.len() + self.q_rpa.len() + self.strain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-source measurement variances with inverse-gamma hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub variances: [f64; 4],
    pub shape: [f64; 4],
    pub scale: [f64; 4],
}

impl NoiseModel {
    /// Shape 1 and scale 1% of each source's sample variance; variances
    /// start at that same 1%.
    pub fn default_for(y: &ObservationVector) -> Self {
        let v = y.to_vector();
        let mut scale = [0.0; 4];
        for (s, b) in scale.iter_mut().enumerate() {
            let part = &v[source_range(s)];
            let n = part.len() as f64;
            let mean = part.iter().sum::<f64>() / n;
            let var = part.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            *b = 0.01 * if var > 0.0 { var } else { 1.0 };
        }
        Self {
            variances: scale,
            shape: [1.0; 4],
            scale,
        }
    }

    pub fn with_variances(variances: [f64; 4]) -> Self {
        Self {
            variances,
            shape: [1.0; 4],
            scale: [1.0; 4],
        }
    }

    /// Diagonal of Σ_y.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..LIKELIHOOD_LEN).map(|i| self.variances[source_of(i)]).collect()
    }
}

/// Per-source residual sums of squares.
pub fn residual_sums(y: &[f64], model: &[f64]) -> [f64; 4] {
    let mut ss = [0.0; 4];
    for (s, out) in ss.iter_mut().enumerate() {
        *out = source_range(s).map(|i| (y[i] - model[i]).powi(2)).sum();
    }
    ss
}

/// Gaussian log-likelihood with diagonal covariance set per source.
pub fn log_likelihood(y: &ObservationVector, model: &[f64], noise: &NoiseModel) -> Result<f64> {
    if noise.variances.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidInput("noise variances must be positive".into()));
    }
    let yv = y.to_vector();
    if model.len() != yv.len() {
        return Err(Error::InvalidInput(format!("model vector has {} entries, data {}", model.len(), yv.len())));
    }
    Ok(log_likelihood_from_sums(&SOURCE_SIZES, &residual_sums(&yv, model), &noise.variances))
}

/// Blockwise Gaussian log-density from per-block sizes, residual sums and variances.
pub(crate) fn log_likelihood_from_sums(sizes: &[usize], ss: &[f64], variances: &[f64]) -> f64 {
    let n: usize = sizes.iter().sum();
    let mut ll = -0.5 * n as f64 * (2.0 * PI).ln();
    for ((&k, &r), &v) in sizes.iter().zip(ss).zip(variances) {
        ll -= 0.5 * (k as f64 * v.ln() + r / v);
    }
    ll
}

/// Conjugate draw σ²_s ~ IG(a_s + n_s/2, b_s + SS_s/2) for every source.
pub fn update_noise<R: Rng + ?Sized>(ss: &[f64; 4], noise: &NoiseModel, rng: &mut R) -> [f64; 4] {
    let mut out = [0.0; 4];
    for s in 0..4 {
        let shape = noise.shape[s] + 0.5 * SOURCE_SIZES[s] as f64;
        let rate = noise.scale[s] + 0.5 * ss[s];
        let g = Gamma::new(shape, 1.0 / rate).expect("positive inverse-gamma parameters");
        out[s] = 1.0 / g.sample(rng);
    }
    out
}
