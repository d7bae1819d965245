use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GewekeResult {
    pub z: f64,
    pub p: f64,
}

/// Compares the means of the first 10% and the last 50% of a chain, each with
/// an autocorrelation-aware variance of the mean.
pub fn geweke_test(chain: &[f64]) -> Result<GewekeResult> {
    if chain.len() < 100 {
        return Err(Error::InvalidInput(format!("Geweke test needs at least 100 draws, got {}", chain.len())));
    }
    let n = chain.len();
    let a = &chain[..n / 10];
    let b = &chain[n - n / 2..];
    let (ma, va) = mean_and_lrv(a);
    let (mb, vb) = mean_and_lrv(b);
    let se2 = va / a.len() as f64 + vb / b.len() as f64;
    if !(se2 > 0.0) {
        return Err(Error::DegenerateChain("a chain segment has zero variance".into()));
    }
    let z = (ma - mb) / se2.sqrt();
    let normal = Normal::standard();
    Ok(GewekeResult {
        z,
        p: 2.0 * (1.0 - normal.cdf(z.abs())),
    })
}

/// Mean and long-run variance σ² = γ₀ + 2Σγ_k, truncated by Geyer's initial
/// monotone sequence of paired autocovariances.
fn mean_and_lrv(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let gamma = |k: usize| c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let g0 = gamma(0);
    if !(g0 > 0.0) {
        return (mean, 0.0);
    }
    let mut total = -g0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let mut pair = gamma(2 * m) + gamma(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev);
        total += 2.0 * pair;
        prev = pair;
        m += 1;
    }
    (mean, total.max(g0 * 1e-12))
}
