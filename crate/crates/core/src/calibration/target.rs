use rand_chacha::ChaCha8Rng;

use super::dram::{dram_sample, DramOptions, DramTarget, PosteriorChain};
use super::forward::ForwardModel;
use super::likelihood::{log_likelihood_from_sums, residual_sums, update_noise, NoiseModel, ObservationVector, SOURCE_SIZES};
use super::prior::PriorSpec;
use crate::error::{Error, Result};

const CACHE_SLOTS: usize = 4;

/// Posterior over θ with per-source noise variances updated by Gibbs steps.
pub struct CalibrationTarget<'a, F: ForwardModel + ?Sized> {
    forward: &'a F,
    data: Vec<f64>,
    prior: PriorSpec,
    noise: NoiseModel,
    /// Recent forward evaluations; the held point is re-evaluated after
    /// every Gibbs step.
    cache: Vec<(Vec<u64>, Vec<f64>)>,
    failures: usize,
}

impl<'a, F: ForwardModel + ?Sized> CalibrationTarget<'a, F> {
    pub fn new(forward: &'a F, data: &ObservationVector, prior: PriorSpec, noise: NoiseModel) -> Self {
        Self {
            forward,
            data: data.to_vector(),
            prior,
            noise,
            cache: Vec::with_capacity(CACHE_SLOTS),
            failures: 0,
        }
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// Forward evaluations that failed and were scored as zero density.
    pub fn failures(&self) -> usize {
        self.failures
    }

    fn predict(&mut self, theta: &[f64]) -> Option<Vec<f64>> {
        let key: Vec<u64> = theta.iter().map(|x| x.to_bits()).collect();
        if let Some((_, m)) = self.cache.iter().find(|(k, _)| *k == key) {
            return Some(m.clone());
        }
        match self.forward.likelihood_vector(theta) {
            Ok(m) if m.iter().all(|v| v.is_finite()) => {
                if self.cache.len() == CACHE_SLOTS {
                    self.cache.remove(0);
                }
                self.cache.push((key, m.clone()));
                Some(m)
            }
            _ => {
                self.failures += 1;
                None
            }
        }
    }
}

impl<F: ForwardModel + ?Sized> DramTarget for CalibrationTarget<'_, F> {
    fn log_density(&mut self, theta: &[f64]) -> f64 {
        let lp = self.prior.log_prior(theta);
        if !lp.is_finite() {
            return f64::NEG_INFINITY;
        }
        match self.predict(theta) {
            Some(m) => {
                let ss = residual_sums(&self.data, &m);
                lp + log_likelihood_from_sums(&SOURCE_SIZES, &ss, &self.noise.variances)
            }
            None => f64::NEG_INFINITY,
        }
    }

    fn gibbs_step(&mut self, theta: &[f64], rng: &mut ChaCha8Rng) {
        if let Some(m) = self.predict(theta) {
            let ss = residual_sums(&self.data, &m);
            self.noise.variances = update_noise(&ss, &self.noise, rng);
        }
    }

    fn auxiliary(&self) -> Vec<f64> {
        self.noise.variances.to_vec()
    }
}

/// DRAM from the prior's initial point with interleaved noise updates.
pub fn calibrate<F: ForwardModel + ?Sized>(
    forward: &F,
    data: &ObservationVector,
    prior: &PriorSpec,
    noise: &NoiseModel,
    opts: &DramOptions,
) -> Result<PosteriorChain> {
    let mut target = CalibrationTarget::new(forward, data, prior.clone(), noise.clone());
    let init = prior.initial();
    if !target.log_density(&init).is_finite() {
        return Err(Error::Numerical("posterior density is zero at the initial point".into()));
    }
    dram_sample(&mut target, &init, &prior.ranges(), opts)
}
