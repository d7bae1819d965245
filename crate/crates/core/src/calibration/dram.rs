//! Delayed-rejection adaptive Metropolis.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-density over θ, optionally with auxiliary state refreshed by a Gibbs
/// step between Metropolis moves.
pub trait DramTarget {
    fn log_density(&mut self, theta: &[f64]) -> f64;

    /// Conditional update of auxiliary state given the current θ.
    fn gibbs_step(&mut self, _theta: &[f64], _rng: &mut ChaCha8Rng) {}

    /// Current auxiliary state, recorded alongside each draw.
    fn auxiliary(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<F: FnMut(&[f64]) -> f64> DramTarget for F {
    fn log_density(&mut self, theta: &[f64]) -> f64 {
        self(theta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DramOptions {
    pub iterations: usize,
    pub burn_in: usize,
    /// First iteration at which the proposal adapts.
    pub adapt_start: usize,
    pub adapt_interval: usize,
    /// Cholesky-factor scale of the second-stage proposal.
    pub dr_scale: f64,
    pub regularization: f64,
    /// Initial proposal standard deviation as a fraction of each range.
    pub initial_sd_fraction: f64,
    pub seed: u64,
}

impl Default for DramOptions {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            burn_in: 2_000,
            adapt_start: 100,
            adapt_interval: 100,
            dr_scale: 0.2,
            regularization: 1e-10,
            initial_sd_fraction: 0.05,
            seed: 0,
        }
    }
}

/// Every iteration's state, including burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChain {
    pub samples: Vec<Vec<f64>>,
    pub auxiliary: Vec<Vec<f64>>,
    pub log_post: Vec<f64>,
    pub accepted: Vec<bool>,
    pub burn_in: usize,
}

impl PosteriorChain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted.iter().filter(|&&a| a).count() as f64 / self.accepted.len().max(1) as f64
    }

    /// Draws after burn-in.
    pub fn kept(&self) -> &[Vec<f64>] {
        &self.samples[self.burn_in..]
    }

    /// Post-burn-in series of coordinate k.
    pub fn series(&self, k: usize) -> Vec<f64> {
        self.kept().iter().map(|s| s[k]).collect()
    }
}

fn chol_or_none(c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    c.clone().cholesky().map(|ch| ch.l())
}

/// Mahalanobis quadratic form (b − a)ᵀ C⁻¹ (b − a) using the factor L of C.
fn quad(l: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let d = DVector::from_iterator(a.len(), a.iter().zip(b).map(|(x, y)| y - x));
    let z = l.solve_lower_triangular(&d).expect("nonsingular proposal factor");
    z.norm_squared()
}

/// Runs the sampler from `init` with initial proposal sd
/// `initial_sd_fraction · ranges`.
pub fn dram_sample<T: DramTarget + ?Sized>(
    target: &mut T,
    init: &[f64],
    ranges: &[f64],
    opts: &DramOptions,
) -> Result<PosteriorChain> {
    let d = init.len();
    if d == 0 || ranges.len() != d {
        return Err(Error::InvalidInput("initial point and ranges must share a nonzero dimension".into()));
    }
    if opts.burn_in >= opts.iterations {
        return Err(Error::InvalidInput("burn-in must be shorter than the chain".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = init.to_vec();
    let mut lp_x = target.log_density(&x);
    if !lp_x.is_finite() {
        return Err(Error::InvalidInput("log-posterior is not finite at the initial point".into()));
    }

    let mut l1 = DMatrix::from_diagonal(&DVector::from_iterator(
        d,
        ranges.iter().map(|r| (opts.initial_sd_fraction * r).abs()),
    ));
    let adapt_scale = 2.38f64.powi(2) / d as f64;

    let mut chain = PosteriorChain {
        samples: Vec::with_capacity(opts.iterations),
        auxiliary: Vec::with_capacity(opts.iterations),
        log_post: Vec::with_capacity(opts.iterations),
        accepted: Vec::with_capacity(opts.iterations),
        burn_in: opts.burn_in,
    };
    // Running sums for the history covariance.
    let mut sum = vec![0.0; d];
    let mut sum_outer = DMatrix::<f64>::zeros(d, d);

    let propose = |rng: &mut ChaCha8Rng, l: &DMatrix<f64>, scale: f64, x: &[f64]| -> Vec<f64> {
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let step = l * z * scale;
        x.iter().zip(step.iter()).map(|(a, b)| a + b).collect()
    };

    for it in 0..opts.iterations {
        let y1 = propose(&mut rng, &l1, 1.0, &x);
        let lp_y1 = target.log_density(&y1);
        let a1 = accept_prob(lp_x, lp_y1);
        let mut accepted = false;
        if rng.random::<f64>() < a1 {
            x = y1;
            accepted = true;
        } else {
            let y2 = propose(&mut rng, &l1, opts.dr_scale, &x);
            let lp_y2 = target.log_density(&y2);
            if lp_y2.is_finite() {
                // Second-stage acceptance with the first-stage proposal
                // evaluated in both directions.
                let a1_rev = accept_prob(lp_y2, lp_y1);
                let log_q_ratio = -0.5 * (quad(&l1, &y2, &y1) - quad(&l1, &x, &y1));
                let num = (1.0 - a1_rev).ln();
                let den = (1.0 - a1).ln();
                let log_a2 = lp_y2 - lp_x + log_q_ratio + num - den;
                if den.is_finite() && rng.random::<f64>().ln() < log_a2.min(0.0) {
                    x = y2;
                    accepted = true;
                }
            }
        }

        target.gibbs_step(&x, &mut rng);
        // The Gibbs step changes the density of the held point.
        lp_x = target.log_density(&x);

        for i in 0..d {
            sum[i] += x[i];
            for j in 0..d {
                sum_outer[(i, j)] += x[i] * x[j];
            }
        }
        chain.samples.push(x.clone());
        chain.auxiliary.push(target.auxiliary());
        chain.log_post.push(lp_x);
        chain.accepted.push(accepted);

        let n = it + 1;
        if n >= opts.adapt_start && n % opts.adapt_interval == 0 && n > d {
            let nf = n as f64;
            let mut cov = DMatrix::<f64>::zeros(d, d);
            for i in 0..d {
                for j in 0..d {
                    cov[(i, j)] = (sum_outer[(i, j)] - sum[i] * sum[j] / nf) / (nf - 1.0);
                }
            }
            let prop = cov * adapt_scale + DMatrix::identity(d, d) * opts.regularization;
            if let Some(l) = chol_or_none(&prop) {
                l1 = l;
            }
        }
    }
    Ok(chain)
}

fn accept_prob(lp_from: f64, lp_to: f64) -> f64 {
    if !lp_to.is_finite() {
        0.0
    } else {
        (lp_to - lp_from).exp().min(1.0)
    }
}
