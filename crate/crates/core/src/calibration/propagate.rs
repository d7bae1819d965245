use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dram::PosteriorChain;
use super::forward::ForwardModel;
use super::likelihood::source_of;
use crate::error::{Error, Result};
use crate::solver::N_SAMPLES;

/// Pointwise 2.5%, 50% and 97.5% percentiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: Vec<f64>,
    pub median: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Band {
    fn from_draws(draws: &[Vec<f64>]) -> Self {
        let dim = draws[0].len();
        let mut band = Band {
            lower: Vec::with_capacity(dim),
            median: Vec::with_capacity(dim),
            upper: Vec::with_capacity(dim),
        };
        let mut column = vec![0.0; draws.len()];
        for i in 0..dim {
            for (c, d) in column.iter_mut().zip(draws) {
                *c = d[i];
            }
            column.sort_by(f64::total_cmp);
            band.lower.push(quantile_sorted(&column, 0.025));
            band.median.push(quantile_sorted(&column, 0.5));
            band.upper.push(quantile_sorted(&column, 0.975));
        }
        band
    }

    /// Fraction of `data` inside [lower, upper].
    pub fn coverage(&self, data: &[f64]) -> f64 {
        let inside = data
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .filter(|(d, (lo, hi))| *d >= *lo && *d <= *hi)
            .count();
        inside as f64 / data.len() as f64
    }

    pub fn widths(&self) -> Vec<f64> {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).collect()
    }
}

/// Linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Credible bands of the model and prediction bands with sampled noise, in
/// the likelihood layout and the waveform layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Propagation {
    pub credible: Band,
    pub prediction: Band,
    pub waveform_credible: Band,
    pub waveform_prediction: Band,
    pub n_draws: usize,
}

/// Pushes the last `n_tail` draws through the forward model. Each draw's
/// noise uses the variances sampled with it; area noise follows from strain
/// noise through the reference area.
pub fn propagate_uncertainty<F: ForwardModel + ?Sized>(
    chain: &PosteriorChain,
    forward: &F,
    n_tail: usize,
    seed: u64,
) -> Result<Propagation> {
    let available = chain.len().saturating_sub(chain.burn_in);
    if n_tail == 0 || n_tail > available {
        return Err(Error::InvalidInput(format!(
            "requested {n_tail} tail draws but only {available} follow burn-in"
        )));
    }
    let start = chain.len() - n_tail;
    let a_dia = forward.reference_area();
    let draws: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = (start..chain.len())
        .into_par_iter()
        .map(|k| {
            let theta = &chain.samples[k];
            let wave = forward.model_vector(theta)?;
            let lik = forward.likelihood_vector(theta)?;
            let var = &chain.auxiliary[k];
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let mut noisy = |x: f64, v: f64| {
                if v > 0.0 {
                    x + Normal::new(0.0, v.sqrt()).expect("finite sd").sample(&mut rng)
                } else {
                    x
                }
            };
            let var_of = |s: usize| var.get(s).copied().unwrap_or(0.0);
            let lik_noisy: Vec<f64> = lik.iter().enumerate().map(|(i, &x)| noisy(x, var_of(source_of(i)))).collect();
            let wave_noisy: Vec<f64> = wave
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let block = i / N_SAMPLES;
                    let v = if block == 3 {
                        var_of(3) * (a_dia / 100.0).powi(2)
                    } else {
                        var_of(block)
                    };
                    noisy(x, v)
                })
                .collect();
            Ok((lik, lik_noisy, wave, wave_noisy))
        })
        .collect::<Result<_>>()?;
    let pick = |f: fn(&(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Vec<Vec<f64>> {
        draws.iter().map(|d| f(d).clone()).collect()
    };
    Ok(Propagation {
        credible: Band::from_draws(&pick(|d| &d.0)),
        prediction: Band::from_draws(&pick(|d| &d.1)),
        waveform_credible: Band::from_draws(&pick(|d| &d.2)),
        waveform_prediction: Band::from_draws(&pick(|d| &d.3)),
        n_draws: n_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&s, 0.5), 3.0);
        assert_eq!(quantile_sorted(&s, 0.0), 1.0);
        assert_eq!(quantile_sorted(&s, 1.0), 5.0);
        assert!((quantile_sorted(&s, 0.1) - 1.4).abs() < 1e-12);
    }
}
