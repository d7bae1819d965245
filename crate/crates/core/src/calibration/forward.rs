use crate::emulator::EmulatorModel;
use crate::error::Result;
use crate::network::ArterialNetwork;
use crate::params::ParameterVector;
use crate::solver::{likelihood_vector_from_model, simulate, InletFlow, SolverOptions};

/// Maps θ to model outputs in both layouts.
pub trait ForwardModel: Sync {
    /// Pressure, flows and area at the observation times (140 entries).
    fn model_vector(&self, theta: &[f64]) -> Result<Vec<f64>>;

    /// Diastolic reference area of the observed vessel (cm²).
    fn reference_area(&self) -> f64;

    /// Systolic/diastolic pressure, flows and strain (107 entries).
    fn likelihood_vector(&self, theta: &[f64]) -> Result<Vec<f64>> {
        likelihood_vector_from_model(&self.model_vector(theta)?, self.reference_area())
    }
}

/// Surrogate forward model.
pub struct EmulatorForward<'a> {
    pub model: &'a EmulatorModel,
    pub a_dia: f64,
}

impl ForwardModel for EmulatorForward<'_> {
    fn model_vector(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.model.predict_mean(theta))
    }

    fn reference_area(&self) -> f64 {
        self.a_dia
    }
}

/// Full solver in the loop, for small validation runs.
pub struct SolverForward<'a> {
    pub network: &'a ArterialNetwork,
    pub inlet: &'a InletFlow,
    pub options: SolverOptions,
}

impl ForwardModel for SolverForward<'_> {
    fn model_vector(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let theta = ParameterVector::from_slice(theta)?;
        Ok(simulate(self.network, &theta, self.inlet, &self.options)?.model_vector())
    }

    fn reference_area(&self) -> f64 {
        self.network.vessels[self.network.inlet].area_dia()
    }
}
