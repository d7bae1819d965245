use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gp::{train_gp, GpComponent, GpOptions};
use super::pca::{fit_pca, PcaReduction};
use super::scaling::MinMaxScaler;
use crate::error::{Error, Result};
use crate::params::{within, Bounds, ParameterVector};

/// Format version of the serialized emulator.
pub const EMULATOR_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmulatorOptions {
    /// Fixed component count; when absent the variance target decides.
    pub n_components: Option<usize>,
    pub variance_target: f64,
    pub gp: GpOptions,
}

impl Default for EmulatorOptions {
    fn default() -> Self {
        Self {
            n_components: Some(20),
            variance_target: 0.999,
            gp: GpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmulatorPrediction {
    /// Output vector in simulator units.
    pub mean: Vec<f64>,
    /// Latent variance of each principal-component score (scaled outputs).
    pub score_variances: Vec<f64>,
    /// The query lies outside the training box.
    pub extrapolated: bool,
}

/// Scalers, PCA basis and one GP per retained score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmulatorModel {
    pub format: u32,
    pub bounds: Vec<Bounds>,
    pub input_scaler: MinMaxScaler,
    pub output_scaler: MinMaxScaler,
    pub pca: PcaReduction,
    pub gps: Vec<GpComponent>,
}

impl EmulatorModel {
    /// `inputs` are raw parameter rows and `outputs` raw simulator vectors.
    pub fn train(
        inputs: &[Vec<f64>],
        outputs: &[Vec<f64>],
        bounds: &[Bounds],
        opts: &EmulatorOptions,
    ) -> Result<Self> {
        if inputs.len() != outputs.len() || inputs.len() < 2 {
            return Err(Error::InvalidInput("emulator needs matching input and output rows".into()));
        }
        let input_scaler = MinMaxScaler::fit(inputs)?;
        let output_scaler = MinMaxScaler::fit(outputs)?;
        let x: Vec<Vec<f64>> = inputs.iter().map(|r| input_scaler.scale(r)).collect();
        let y: Vec<Vec<f64>> = outputs.iter().map(|r| output_scaler.scale(r)).collect();
        let pca = fit_pca(&y, opts.variance_target, opts.n_components)?;
        if pca.n_components() >= inputs.len() {
            return Err(Error::InvalidInput(format!(
                "{} components need more than {} training rows",
                pca.n_components(),
                inputs.len()
            )));
        }
        let scores: Vec<Vec<f64>> = y.iter().map(|r| pca.scores(r)).collect();
        let gps = (0..pca.n_components())
            .into_par_iter()
            .map(|c| {
                let t: Vec<f64> = scores.iter().map(|s| s[c]).collect();
                train_gp(&x, &t, &opts.gp)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            format: EMULATOR_FORMAT,
            bounds: bounds.to_vec(),
            input_scaler,
            output_scaler,
            pca,
            gps,
        })
    }

    pub fn n_components(&self) -> usize {
        self.gps.len()
    }

    pub fn output_dim(&self) -> usize {
        self.pca.dim()
    }

    pub fn is_extrapolation(&self, theta: &[f64]) -> bool {
        !within(&self.bounds, theta)
    }

    pub fn predict(&self, theta: &ParameterVector) -> EmulatorPrediction {
        self.predict_slice(&theta.to_array())
    }

    pub fn predict_slice(&self, theta: &[f64]) -> EmulatorPrediction {
        let x = self.input_scaler.scale(theta);
        let (scores, score_variances): (Vec<f64>, Vec<f64>) = self.gps.iter().map(|g| g.predict(&x)).unzip();
        EmulatorPrediction {
            mean: self.output_scaler.unscale(&self.pca.reconstruct(&scores)),
            score_variances,
            extrapolated: self.is_extrapolation(theta),
        }
    }

    /// Mean output only; the per-query cost is linear in the training size.
    pub fn predict_mean(&self, theta: &[f64]) -> Vec<f64> {
        let x = self.input_scaler.scale(theta);
        let scores: Vec<f64> = self.gps.iter().map(|g| g.predict_mean(&x)).collect();
        self.output_scaler.unscale(&self.pca.reconstruct(&scores))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Restores a saved model.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<Self>(text)?.restore()
    }

    /// Checks the format of a deserialized model and refactors every GP.
    pub fn restore(mut self) -> Result<Self> {
        if self.format != EMULATOR_FORMAT {
            return Err(Error::InvalidInput(format!(
                "emulator format {} is not supported (expected {EMULATOR_FORMAT})",
                self.format
            )));
        }
        for g in &mut self.gps {
            g.refactor()?;
        }
        Ok(self)
    }
}

/// Random train/test partition holding out `fraction` of `n` rows (at least one).
pub fn holdout_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = ((n as f64 * fraction).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

/// RMSE of each equal-length block of the output (one block per signal)
/// relative to the root-mean-square of the true values in that block.
pub fn relative_rmse(predicted: &[Vec<f64>], truth: &[Vec<f64>], n_signals: usize) -> Vec<f64> {
    let dim = truth.first().map_or(0, |t| t.len());
    let block = dim / n_signals;
    (0..n_signals)
        .map(|s| {
            let (mut err, mut norm) = (0.0, 0.0);
            for (p, t) in predicted.iter().zip(truth) {
                for i in s * block..(s + 1) * block {
                    err += (p[i] - t[i]).powi(2);
                    norm += t[i] * t[i];
                }
            }
            if norm > 0.0 {
                (err / norm).sqrt()
            } else {
                err.sqrt()
            }
        })
        .collect()
}
