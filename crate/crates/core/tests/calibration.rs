use std::f64::consts::TAU;

use pulmocal::calibration::{
    calibrate, dram_sample, geweke_test, propagate_uncertainty, read_chain_csv, write_chain_csv, CalibrationSummary,
    DramOptions, ForwardModel, NoiseModel, ObservationVector, PosteriorChain, PriorSpec, SOURCE_SIZES,
};
use pulmocal::analysis::ks_test_cdf;
use pulmocal::params::DEFAULT_BOUNDS;
use pulmocal::solver::{LIKELIHOOD_LEN, MODEL_LEN, N_SAMPLES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, InverseGamma, Normal};

fn batch_mean_se(x: &[f64], batches: usize) -> f64 {
    let b = x.len() / batches;
    let means: Vec<f64> = (0..batches).map(|i| x[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

fn opts(iterations: usize, burn_in: usize, seed: u64) -> DramOptions {
    DramOptions {
        iterations,
        burn_in,
        seed,
        ..Default::default()
    }
}

#[test]
fn dram_recovers_a_correlated_free_gaussian() {
    let (mu, var) = ([3.0, -1.0], [4.0, 1.0]);
    let mut target = |x: &[f64]| -0.5 * ((x[0] - mu[0]).powi(2) / var[0] + (x[1] - mu[1]).powi(2) / var[1]);
    let chain = dram_sample(&mut target, &[0.0, 0.0], &[10.0, 5.0], &opts(40_000, 4_000, 11)).unwrap();
    for k in 0..2 {
        let s = chain.series(k);
        let n = s.len() as f64;
        let m = s.iter().sum::<f64>() / n;
        let v = s.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        let se = batch_mean_se(&s, 50);
        assert!((m - mu[k]).abs() < 3.0 * se, "mean {m} vs {} (se {se})", mu[k]);
        assert!((v / var[k] - 1.0).abs() < 0.1, "variance {v} vs {}", var[k]);
    }
    let rate = chain.acceptance_rate();
    assert!(rate > 0.15 && rate < 0.9, "acceptance {rate}");
}

#[test]
fn dram_draws_pass_ks_against_the_target() {
    let mut target = |x: &[f64]| -0.5 * x[0] * x[0];
    let chain = dram_sample(&mut target, &[0.5], &[6.0], &opts(30_000, 2_000, 5)).unwrap();
    let thinned: Vec<f64> = chain.series(0).into_iter().step_by(10).collect();
    let n = Normal::standard();
    let r = ks_test_cdf(&thinned, |x| n.cdf(x)).unwrap();
    assert!(r.p > 0.01, "KS p = {}", r.p);
}

#[test]
fn draws_never_leave_a_bounded_support() {
    let mut target = |x: &[f64]| {
        if x.iter().all(|v| (0.0..=1.0).contains(v)) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    };
    let chain = dram_sample(&mut target, &[0.5, 0.5], &[1.0, 1.0], &opts(5_000, 500, 2)).unwrap();
    assert!(chain.samples.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    let s = chain.series(0);
    let m = s.iter().sum::<f64>() / s.len() as f64;
    assert!((m - 0.5).abs() < 0.05);
}

#[test]
fn geweke_false_alarm_rate_on_iid_chains() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let rejections = (0..100)
        .filter(|_| {
            let x: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
            geweke_test(&x).unwrap().p < 0.05
        })
        .count();
    assert!(rejections <= 10, "{rejections} rejections");
}

/// Forward model whose output ignores θ, leaving fixed residuals.
struct Fixed {
    model: Vec<f64>,
}

impl ForwardModel for Fixed {
    fn model_vector(&self, _theta: &[f64]) -> pulmocal::Result<Vec<f64>> {
        Ok(vec![0.0; MODEL_LEN])
    }

    fn reference_area(&self) -> f64 {
        1.0
    }

    fn likelihood_vector(&self, _theta: &[f64]) -> pulmocal::Result<Vec<f64>> {
        Ok(self.model.clone())
    }
}

fn fake_data(seed: u64) -> (ObservationVector, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = vec![0.0; LIKELIHOOD_LEN];
    model[0] = 25.0;
    model[1] = 9.0;
    for i in 0..N_SAMPLES {
        let t = i as f64 / N_SAMPLES as f64;
        model[2 + i] = 30.0 + 20.0 * (TAU * t).sin();
        model[2 + N_SAMPLES + i] = 35.0 + 25.0 * (TAU * t).sin();
        model[2 + 2 * N_SAMPLES + i] = 10.0 + 5.0 * (TAU * t).sin();
    }
    let y: Vec<f64> = model
        .iter()
        .map(|m| m + 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    (ObservationVector::from_vector(&y).unwrap(), model)
}

#[test]
fn noise_draws_follow_their_inverse_gamma_conditionals() {
    let (data, model) = fake_data(1);
    let forward = Fixed { model: model.clone() };
    let prior = PriorSpec::uniform(&DEFAULT_BOUNDS).unwrap();
    let noise = NoiseModel::default_for(&data);
    let chain = calibrate(&forward, &data, &prior, &noise, &opts(4_000, 1_000, 8)).unwrap();
    let y = data.to_vector();
    let mut offset = 0;
    for s in 0..4 {
        let n = SOURCE_SIZES[s];
        let ss: f64 = (offset..offset + n).map(|i| (y[i] - model[i]).powi(2)).sum();
        offset += n;
        let ig = InverseGamma::new(noise.shape[s] + 0.5 * n as f64, noise.scale[s] + 0.5 * ss).unwrap();
        let draws: Vec<f64> = chain.auxiliary[chain.burn_in..].iter().step_by(3).map(|a| a[s]).collect();
        let r = ks_test_cdf(&draws, |x| ig.cdf(x)).unwrap();
        assert!(r.p > 0.01, "source {s}: KS p = {}", r.p);
    }
}

#[test]
fn chain_csv_round_trip_and_summary() {
    let (data, model) = fake_data(2);
    let forward = Fixed { model };
    let prior = PriorSpec::gaussian(&DEFAULT_BOUNDS).unwrap();
    let chain = calibrate(&forward, &data, &prior, &NoiseModel::default_for(&data), &opts(600, 100, 4)).unwrap();
    let mut buf = Vec::new();
    write_chain_csv(&chain, &mut buf).unwrap();
    let text = format!("# comment\n{}", String::from_utf8(buf).unwrap());
    let back = read_chain_csv(&text, 100).unwrap();
    assert_eq!(back, chain);
    let summary = CalibrationSummary::from_chain(&chain).unwrap();
    assert_eq!(summary.parameters.len(), 4);
    assert_eq!(summary.noise.len(), 4);
    // With a flat likelihood in θ the posterior is the prior.
    let eta = summary.parameter("eta_l").unwrap();
    assert!(eta.marginal.covers(2.13));
}

#[test]
fn degenerate_chain_has_zero_credible_width() {
    let (_, model) = fake_data(3);
    let forward = Fixed { model };
    let theta = vec![2.5, 20.0, 2.5, 20.0];
    let chain = PosteriorChain {
        samples: vec![theta; 300],
        auxiliary: vec![vec![0.4, 1.0, 1.0, 0.2]; 300],
        log_post: vec![0.0; 300],
        accepted: vec![false; 300],
        burn_in: 50,
    };
    let p = propagate_uncertainty(&chain, &forward, 200, 7).unwrap();
    assert!(p.credible.widths().iter().all(|&w| w == 0.0));
    for i in 0..LIKELIHOOD_LEN {
        assert!(p.prediction.lower[i] <= p.credible.lower[i]);
        assert!(p.prediction.upper[i] >= p.credible.upper[i]);
        assert!(p.prediction.upper[i] > p.prediction.lower[i]);
    }
    assert_eq!(p.waveform_credible.lower.len(), MODEL_LEN);
    assert!(propagate_uncertainty(&chain, &forward, 400, 7).is_err());
    assert_eq!(propagate_uncertainty(&chain, &forward, 200, 7).unwrap(), p);
}
