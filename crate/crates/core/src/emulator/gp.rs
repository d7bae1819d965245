use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_in_place, dot, inverse_from_cholesky, solve_lower, solve_upper_transposed};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Keeps log-hyperparameters away from overflow while Adam explores.
const LOG_CLAMP: f64 = 18.0;

/// Matérn ν = 5/2 covariance with per-dimension lengthscales.
pub fn matern52(x: &[f64], y: &[f64], variance: f64, lengthscales: &[f64]) -> f64 {
    let d2: f64 = x
        .iter()
        .zip(y)
        .zip(lengthscales)
        .map(|((a, b), l)| ((a - b) / l).powi(2))
        .sum();
    matern52_from_sq(d2, variance)
}

fn matern52_from_sq(d2: f64, variance: f64) -> f64 {
    let d = d2.sqrt();
    variance * (1.0 + SQRT5 * d + 5.0 * d2 / 3.0) * (-SQRT5 * d).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpOptions {
    pub learning_rate: f64,
    pub iterations: usize,
    pub init_lengthscale: f64,
    pub init_signal_variance: f64,
    pub init_noise_variance: f64,
    /// Added to the kernel diagonal before factorization.
    pub jitter: f64,
    pub noise_floor: f64,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            iterations: 1000,
            init_lengthscale: 0.5,
            init_signal_variance: 1.0,
            init_noise_variance: 1e-2,
            jitter: 1e-6,
            noise_floor: 1e-8,
        }
    }
}

/// Hyperparameters in standardized target units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl GpHyper {
    fn to_log(&self) -> Vec<f64> {
        let mut p = vec![self.signal_variance.ln()];
        p.extend(self.lengthscales.iter().map(|l| l.ln()));
        p.push(self.noise_variance.ln());
        p
    }

    fn from_log(p: &[f64]) -> Self {
        let d = p.len() - 2;
        Self {
            signal_variance: p[0].exp(),
            lengthscales: p[1..=d].iter().map(|x| x.exp()).collect(),
            noise_variance: p[d + 1].exp(),
        }
    }
}

/// Zero-mean GP on one output score. Targets are divided by their standard
/// deviation before fitting, so hyperparameters start on a common scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpComponent {
    pub hyper: GpHyper,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub target_scale: f64,
    pub jitter: f64,
    pub nll_initial: f64,
    pub nll_final: f64,
    #[serde(skip)]
    chol: Vec<f64>,
    #[serde(skip)]
    alpha: Vec<f64>,
}

impl GpComponent {
    /// Builds the factorized system for given hyperparameters.
    pub fn from_hyper(hyper: GpHyper, inputs: Vec<Vec<f64>>, targets: Vec<f64>, jitter: f64) -> Result<Self> {
        let target_scale = target_scale(&targets);
        let mut gp = Self {
            hyper,
            inputs,
            targets,
            target_scale,
            jitter,
            nll_initial: f64::NAN,
            nll_final: f64::NAN,
            chol: Vec::new(),
            alpha: Vec::new(),
        };
        gp.refactor()?;
        Ok(gp)
    }

    /// Recomputes the Cholesky factor and weights from stored fields.
    pub fn refactor(&mut self) -> Result<()> {
        let n = self.inputs.len();
        let mut k = kernel_matrix(&self.inputs, &self.hyper, self.jitter);
        if !cholesky_in_place(&mut k, n) {
            return Err(Error::Numerical("GP kernel matrix is not positive definite".into()));
        }
        let mut alpha: Vec<f64> = self.targets.iter().map(|t| t / self.target_scale).collect();
        solve_lower(&k, n, &mut alpha);
        solve_upper_transposed(&k, n, &mut alpha);
        self.chol = k;
        self.alpha = alpha;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn cross(&self, x: &[f64]) -> Vec<f64> {
        self.inputs
            .iter()
            .map(|xi| matern52(x, xi, self.hyper.signal_variance, &self.hyper.lengthscales))
            .collect()
    }

    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        self.target_scale * dot(&self.cross(x), &self.alpha)
    }

    /// Posterior mean and latent variance, in target units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let mut k = self.cross(x);
        let mean = self.target_scale * dot(&k, &self.alpha);
        solve_lower(&self.chol, self.len(), &mut k);
        let var = (self.hyper.signal_variance - dot(&k, &k)).max(0.0);
        (mean, var * self.target_scale * self.target_scale)
    }

    /// Noise variance in target units.
    pub fn noise_variance(&self) -> f64 {
        self.hyper.noise_variance * self.target_scale * self.target_scale
    }
}

fn target_scale(targets: &[f64]) -> f64 {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let sd = (targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n).sqrt();
    let rms = (targets.iter().map(|t| t * t).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        sd
    } else if rms > 0.0 {
        rms
    } else {
        1.0
    }
}

fn kernel_matrix(inputs: &[Vec<f64>], hyper: &GpHyper, jitter: f64) -> Vec<f64> {
    let n = inputs.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = hyper.signal_variance + hyper.noise_variance + jitter;
        for j in 0..i {
            let v = matern52(&inputs[i], &inputs[j], hyper.signal_variance, &hyper.lengthscales);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Squared coordinate differences of every pair i > j, per dimension.
struct PairGeometry {
    n: usize,
    dims: usize,
    sq: Vec<Vec<f64>>,
}

impl PairGeometry {
    fn new(inputs: &[Vec<f64>]) -> Self {
        let n = inputs.len();
        let dims = inputs[0].len();
        let mut sq = vec![Vec::with_capacity(n * (n - 1) / 2); dims];
        for i in 0..n {
            for j in 0..i {
                for (k, s) in sq.iter_mut().enumerate() {
                    s.push((inputs[i][k] - inputs[j][k]).powi(2));
                }
            }
        }
        Self { n, dims, sq }
    }

    /// NLL and its gradient with respect to the log-hyperparameters.
    fn nll_and_grad(&self, log_p: &[f64], y: &[f64], jitter: f64) -> Option<(f64, Vec<f64>)> {
        let n = self.n;
        let d = self.dims;
        let hyper = GpHyper::from_log(log_p);
        let sf2 = hyper.signal_variance;
        let inv_l2: Vec<f64> = hyper.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();

        // Kernel values and the shared factor of the lengthscale derivatives.
        let pairs = n * (n - 1) / 2;
        let mut kf = Vec::with_capacity(pairs);
        let mut dfac = Vec::with_capacity(pairs);
        let mut k = vec![0.0; n * n];
        let mut p = 0;
        for i in 0..n {
            k[i * n + i] = sf2 + hyper.noise_variance + jitter;
            for j in 0..i {
                let mut d2 = 0.0;
                for (s, w) in self.sq.iter().zip(&inv_l2) {
                    d2 += s[p] * w;
                }
                let dist = d2.sqrt();
                let e = (-SQRT5 * dist).exp();
                let v = sf2 * (1.0 + SQRT5 * dist + 5.0 * d2 / 3.0) * e;
                kf.push(v);
                dfac.push(sf2 * e * (5.0 / 3.0) * (1.0 + SQRT5 * dist));
                k[i * n + j] = v;
                k[j * n + i] = v;
                p += 1;
            }
        }
        if !cholesky_in_place(&mut k, n) {
            return None;
        }
        let mut alpha = y.to_vec();
        solve_lower(&k, n, &mut alpha);
        let fit = dot(&alpha, &alpha);
        solve_upper_transposed(&k, n, &mut alpha);
        let logdet: f64 = (0..n).map(|i| k[i * n + i].ln()).sum::<f64>() * 2.0;
        let nll = 0.5 * fit + 0.5 * logdet + 0.5 * n as f64 * (2.0 * PI).ln();
        if !nll.is_finite() {
            return None;
        }

        // ½ tr(W ∂K) with W = K⁻¹ − ααᵀ; off-diagonal pairs count twice.
        let inv = inverse_from_cholesky(&k, n);
        let mut grad = vec![0.0; d + 2];
        let mut trace_w = 0.0;
        let mut p = 0;
        for i in 0..n {
            let w_ii = inv[i * n + i] - alpha[i] * alpha[i];
            trace_w += w_ii;
            grad[0] += 0.5 * w_ii * sf2;
            for j in 0..i {
                let w = inv[i * n + j] - alpha[i] * alpha[j];
                grad[0] += w * kf[p];
                let c = w * dfac[p];
                for (kd, s) in self.sq.iter().enumerate() {
                    grad[1 + kd] += c * s[p] * inv_l2[kd];
                }
                p += 1;
            }
        }
        grad[d + 1] = 0.5 * hyper.noise_variance * trace_w;
        Some((nll, grad))
    }
}

/// Fits hyperparameters by Adam on the log marginal likelihood and returns the
/// best iterate, factorized for prediction.
pub fn train_gp(inputs: &[Vec<f64>], targets: &[f64], opts: &GpOptions) -> Result<GpComponent> {
    let n = inputs.len();
    if n < 2 || targets.len() != n {
        return Err(Error::InvalidInput("GP training needs at least two matching inputs and targets".into()));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("GP targets must be finite".into()));
    }
    let dims = inputs[0].len();
    if dims == 0 || inputs.iter().any(|x| x.len() != dims) {
        return Err(Error::InvalidInput("GP inputs must share a nonzero dimension".into()));
    }
    let scale = target_scale(targets);
    let y: Vec<f64> = targets.iter().map(|t| t / scale).collect();
    let geometry = PairGeometry::new(inputs);

    let init = GpHyper {
        signal_variance: opts.init_signal_variance,
        lengthscales: vec![opts.init_lengthscale; dims],
        noise_variance: opts.init_noise_variance.max(opts.noise_floor),
    };
    let mut params = init.to_log();
    let log_floor = opts.noise_floor.ln();
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut best = (f64::INFINITY, params.clone());
    let mut initial = f64::NAN;

    for it in 0..=opts.iterations {
        let (nll, grad) = geometry
            .nll_and_grad(&params, &y, opts.jitter)
            .ok_or(Error::NonFiniteLoss { iteration: it })?;
        if it == 0 {
            initial = nll;
        }
        if nll < best.0 {
            best = (nll, params.clone());
        }
        if it == opts.iterations {
            break;
        }
        let t = (it + 1) as i32;
        for i in 0..params.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
            let mh = m[i] / (1.0 - b1.powi(t));
            let vh = v[i] / (1.0 - b2.powi(t));
            params[i] = (params[i] - opts.learning_rate * mh / (vh.sqrt() + eps)).clamp(-LOG_CLAMP, LOG_CLAMP);
        }
        let last = params.len() - 1;
        params[last] = params[last].max(log_floor);
    }

    let mut gp = GpComponent::from_hyper(GpHyper::from_log(&best.1), inputs.to_vec(), targets.to_vec(), opts.jitter)?;
    gp.nll_initial = initial;
    gp.nll_final = best.0;
    Ok(gp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matern_examples() {
        let l = [1.0];
        assert_eq!(matern52(&[0.3], &[0.3], 2.5, &l), 2.5);
        let k1 = matern52(&[0.0], &[1.0], 1.0, &l);
        let oracle = (1.0 + 5f64.sqrt() + 5.0 / 3.0) * (-(5f64.sqrt())).exp();
        assert!((k1 - oracle).abs() < 1e-14);
        assert!((k1 - 0.524).abs() < 5e-4);
        let far: Vec<f64> = (1..40).map(|i| matern52(&[0.0], &[i as f64 * 0.5], 1.0, &l)).collect();
        assert!(far.windows(2).all(|w| w[1] < w[0]));
        assert!(far[38] < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random(), rng.random()]).collect();
        let y: Vec<f64> = x.iter().map(|p| (4.0 * p[0]).sin() + p[1] * p[1]).collect();
        let g = PairGeometry::new(&x);
        let p0 = vec![0.2f64.ln(), 0.4f64.ln(), 0.7f64.ln(), 0.05f64.ln()];
        let (_, grad) = g.nll_and_grad(&p0, &y, 1e-6).unwrap();
        for i in 0..p0.len() {
            let h = 1e-5;
            let mut a = p0.clone();
            let mut b = p0.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (g.nll_and_grad(&a, &y, 1e-6).unwrap().0 - g.nll_and_grad(&b, &y, 1e-6).unwrap().0) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-5 * fd.abs().max(1.0), "param {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn training_lowers_nll_and_interpolates() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.random(), rng.random()]).collect();
        let y: Vec<f64> = x.iter().map(|p| 3.0 * (3.0 * p[0]).sin() + 2.0 * p[1]).collect();
        let opts = GpOptions {
            iterations: 300,
            ..Default::default()
        };
        let gp = train_gp(&x, &y, &opts).unwrap();
        assert!(gp.nll_final <= gp.nll_initial);
        for (xi, yi) in x.iter().zip(&y) {
            assert!((gp.predict_mean(xi) - yi).abs() <= 3.0 * gp.noise_variance().sqrt() + 1e-6);
        }
        let q = [0.47f64, 0.52];
        let exact = 3.0 * (3.0 * q[0]).sin() + 2.0 * q[1];
        assert!((gp.predict_mean(&q) - exact).abs() < 0.05);
        let (mean, var) = gp.predict(&q);
        assert_eq!(mean, gp.predict_mean(&q));
        assert!(var >= 0.0);
    }

    #[test]
    fn zero_targets_predict_zero() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0]).collect();
        let opts = GpOptions {
            iterations: 200,
            ..Default::default()
        };
        let gp = train_gp(&x, &[0.0; 10], &opts).unwrap();
        assert!(gp.nll_final <= gp.nll_initial);
        assert!(gp.hyper.noise_variance < opts.init_noise_variance);
        assert!(gp.hyper.signal_variance < opts.init_signal_variance);
        assert_eq!(gp.predict_mean(&[0.33]), 0.0);
    }

    #[test]
    fn refactor_reproduces_predictions() {
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 12.0, (i as f64).cos()]).collect();
        let y: Vec<f64> = x.iter().map(|p| p[0] - p[1]).collect();
        let opts = GpOptions {
            iterations: 50,
            ..Default::default()
        };
        let gp = train_gp(&x, &y, &opts).unwrap();
        let json = serde_json::to_string(&gp).unwrap();
        let mut back: GpComponent = serde_json::from_str(&json).unwrap();
        back.refactor().unwrap();
        let q = [0.31, 0.2];
        assert_eq!(gp.predict(&q).0.to_bits(), back.predict(&q).0.to_bits());
        assert_eq!(gp.predict(&q).1.to_bits(), back.predict(&q).1.to_bits());
    }
}
