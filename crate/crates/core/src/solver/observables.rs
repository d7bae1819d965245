use serde::{Deserialize, Serialize};

use super::SimulationOutput;
use crate::error::{Error, Result};

/// Samples per signal over one period.
pub const N_SAMPLES: usize = 35;
/// Emulated output: pressure, two flows and area.
pub const MODEL_LEN: usize = 4 * N_SAMPLES;
/// Systolic and diastolic pressure, two flows and strain.
pub const LIKELIHOOD_LEN: usize = 2 + 3 * N_SAMPLES;

/// Model outputs in both the emulated and the likelihood layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub model_vector: Vec<f64>,
    pub likelihood_vector: Vec<f64>,
}

pub fn extract_observables(sim: &SimulationOutput, a_dia: f64) -> Result<Observables> {
    let model_vector = sim.model_vector();
    let likelihood_vector = likelihood_vector_from_model(&model_vector, a_dia)?;
    Ok(Observables {
        model_vector,
        likelihood_vector,
    })
}

/// [max p, min p, q_lpa, q_rpa, 100·(A − A_dia)/A_dia] from a 140-vector.
pub fn likelihood_vector_from_model(model: &[f64], a_dia: f64) -> Result<Vec<f64>> {
    if model.len() != MODEL_LEN {
        return Err(Error::InvalidInput(format!("model vector needs {MODEL_LEN} entries, got {}", model.len())));
    }
    if !(a_dia > 0.0) {
        return Err(Error::InvalidInput("reference area must be positive".into()));
    }
    let n = N_SAMPLES;
    let pressure = &model[..n];
    let mut out = Vec::with_capacity(LIKELIHOOD_LEN);
    out.push(pressure.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    out.push(pressure.iter().copied().fold(f64::INFINITY, f64::min));
    out.extend_from_slice(&model[n..3 * n]);
    out.extend(model[3 * n..].iter().map(|a| 100.0 * (a - a_dia) / a_dia));
    Ok(out)
}
