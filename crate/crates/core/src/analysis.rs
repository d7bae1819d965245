//! Post-hoc statistics: flow split, two-sample tests and correlations, plus
//! CSV emitters for plotting.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::calibration::{Band, PosteriorChain};
use crate::error::{Error, Result};
use crate::params::PARAM_NAMES;

/// Correlations beyond this magnitude are flagged as strong.
pub const STRONG_CORRELATION: f64 = 0.8;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Fraction of mean flow entering the left lung.
pub fn flow_split(q_lpa: &[f64], q_rpa: &[f64]) -> Result<f64> {
    if q_lpa.is_empty() || q_lpa.len() != q_rpa.len() {
        return Err(Error::InvalidInput("flow series must be nonempty and of equal length".into()));
    }
    let (l, r) = (mean(q_lpa), mean(q_rpa));
    if !(l + r > 0.0) {
        return Err(Error::InvalidInput("total mean flow must be positive".into()));
    }
    Ok(l / (l + r))
}

/// (x_d − x_b)/|x_b|
pub fn relative_change(baseline: f64, disease: f64) -> Result<f64> {
    if baseline == 0.0 {
        return Err(Error::InvalidInput("relative change from a zero baseline".into()));
    }
    Ok((disease - baseline) / baseline.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityMetrics {
    pub flow_split: f64,
    /// Time-mean MPA pressure (mmHg).
    pub mpap: f64,
}

impl SeverityMetrics {
    pub fn from_signals(pressure: &[f64], q_lpa: &[f64], q_rpa: &[f64]) -> Result<Self> {
        if pressure.is_empty() {
            return Err(Error::InvalidInput("empty pressure series".into()));
        }
        Ok(Self {
            flow_split: flow_split(q_lpa, q_rpa)?,
            mpap: mean(pressure),
        })
    }

    pub fn relative_change(&self, disease: &Self) -> Result<(f64, f64)> {
        Ok((
            relative_change(self.flow_split, disease.flow_split)?,
            relative_change(self.mpap, disease.mpap)?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p: f64,
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput("two-sample tests need at least two values per sample".into()));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("samples must be finite".into()));
    }
    Ok(())
}

fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Kolmogorov distribution tail Q(λ) = 2 Σ (−1)^{k−1} exp(−2k²λ²).
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut prev = 0.0f64;
    for k in 1..=200 {
        let term = sign * 2.0 * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() <= 1e-12 * sum.abs() || term.abs() <= 1e-300 {
            return sum.clamp(0.0, 1.0);
        }
        if term.abs() > prev.abs() && k > 1 {
            break;
        }
        prev = term;
        sign = -sign;
    }
    sum.clamp(0.0, 1.0)
}

/// Two-sample KS statistic sup|F_a − F_b| with the asymptotic p-value using
/// the effective size √(nm/(n+m)) and the usual small-sample correction.
pub fn ks_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_samples(a, b)?;
    let (sa, sb) = (sorted(a), sorted(b));
    let (n, m) = (sa.len(), sb.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = sa[i].min(sb[j]);
        while i < n && sa[i] <= x {
            i += 1;
        }
        while j < m && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = (n as f64 * m as f64 / (n + m) as f64).sqrt();
    Ok(TestResult {
        statistic: d,
        p: kolmogorov_q((en + 0.12 + 0.11 / en) * d),
    })
}

/// One-sample KS test of `a` against a continuous CDF.
pub fn ks_test_cdf(a: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestResult> {
    if a.len() < 2 {
        return Err(Error::InvalidInput("KS test needs at least two values".into()));
    }
    let s = sorted(a);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    let en = n.sqrt();
    Ok(TestResult {
        statistic: d,
        p: kolmogorov_q((en + 0.12 + 0.11 / en) * d),
    })
}

/// Mann–Whitney U for sample `a`: the count of pairs with a > b plus half the
/// ties, so a entirely below b gives U = 0. Two-sided p from the normal
/// approximation with tie-corrected variance and continuity correction.
pub fn mannwhitney_u(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_samples(a, b)?;
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let mut all: Vec<(f64, bool)> = a.iter().map(|&x| (x, true)).chain(b.iter().map(|&x| (x, false))).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        for item in &all[i..=j] {
            if item.1 {
                rank_sum_a += avg;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_a - (n1 * (n1 + 1)) as f64 / 2.0;
    let mu = (n1 * n2) as f64 / 2.0;
    let nf = n as f64;
    let var = (n1 * n2) as f64 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let p = if var > 0.0 {
        let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
        (2.0 * (1.0 - Normal::standard().cdf(z))).min(1.0)
    } else {
        1.0
    };
    Ok(TestResult { statistic: u, p })
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidInput("correlation needs two equal-length series of at least 3".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::InvalidInput("correlation of a constant series".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlations between two sets of named series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub rho: Vec<Vec<f64>>,
}

impl CorrelationReport {
    pub fn new(rows: &[(&str, Vec<f64>)], columns: &[(&str, Vec<f64>)]) -> Result<Self> {
        let rho = rows
            .iter()
            .map(|(_, x)| columns.iter().map(|(_, y)| pearson(x, y)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rows: rows.iter().map(|r| r.0.to_string()).collect(),
            columns: columns.iter().map(|c| c.0.to_string()).collect(),
            rho,
        })
    }

    /// (row, column, ρ) with |ρ| above the strong threshold.
    pub fn strong(&self) -> Vec<(String, String, f64)> {
        let mut out = Vec::new();
        for (i, r) in self.rows.iter().enumerate() {
            for (j, c) in self.columns.iter().enumerate() {
                if self.rho[i][j].abs() > STRONG_CORRELATION {
                    out.push((r.clone(), c.clone(), self.rho[i][j]));
                }
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "row,{}", self.columns.join(","))?;
        for (r, vals) in self.rows.iter().zip(&self.rho) {
            let cells: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{r},{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// KS and Mann–Whitney comparison of one parameter across two posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorComparison {
    pub parameter: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub ks: TestResult,
    pub mann_whitney: TestResult,
}

/// Compares the last `n_tail` draws of each chain, parameter by parameter.
pub fn compare_posteriors(a: &PosteriorChain, b: &PosteriorChain, n_tail: usize) -> Result<Vec<PosteriorComparison>> {
    let tail = |c: &PosteriorChain, k: usize| -> Result<Vec<f64>> {
        let s = c.series(k);
        if n_tail > s.len() {
            return Err(Error::InvalidInput(format!("{n_tail} tail draws requested from {}", s.len())));
        }
        Ok(s[s.len() - n_tail..].to_vec())
    };
    (0..a.samples[0].len())
        .map(|k| {
            let (x, y) = (tail(a, k)?, tail(b, k)?);
            Ok(PosteriorComparison {
                parameter: PARAM_NAMES.get(k).map_or_else(|| format!("theta_{k}"), |s| s.to_string()),
                mean_a: mean(&x),
                mean_b: mean(&y),
                ks: ks_test(&x, &y)?,
                mann_whitney: mannwhitney_u(&x, &y)?,
            })
        })
        .collect()
}

/// Equal-width histogram over [lo, hi]; returns (left edge, right edge, count).
pub fn histogram(x: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(f64, f64, usize)> {
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in x {
        if v >= lo && v <= hi && w > 0.0 {
            counts[(((v - lo) / w) as usize).min(bins - 1)] += 1;
        }
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * w, lo + (i + 1) as f64 * w, c))
        .collect()
}

/// Histograms of several named samples over a shared range.
pub fn write_histograms_csv<W: Write>(series: &[(&str, &[f64])], bins: usize, mut out: W) -> std::io::Result<()> {
    let lo = series.iter().flat_map(|s| s.1.iter()).copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().flat_map(|s| s.1.iter()).copied().fold(f64::NEG_INFINITY, f64::max);
    writeln!(out, "series,bin_lo,bin_hi,count,density")?;
    for (name, x) in series {
        for (a, b, c) in histogram(x, lo, hi, bins) {
            let density = c as f64 / (x.len() as f64 * (b - a));
            writeln!(out, "{name},{a},{b},{c},{density}")?;
        }
    }
    Ok(())
}

/// Waveform with its credible and prediction bands, plus optional data.
pub fn write_band_csv<W: Write>(
    times: &[f64],
    credible: &Band,
    prediction: &Band,
    data: Option<&[f64]>,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "t,median,credible_lo,credible_hi,prediction_lo,prediction_hi,data")?;
    for (i, t) in times.iter().enumerate() {
        let d = data.map_or(String::new(), |d| d[i].to_string());
        writeln!(
            out,
            "{t},{},{},{},{},{},{d}",
            credible.median[i], credible.lower[i], credible.upper[i], prediction.lower[i], prediction.upper[i]
        )?;
    }
    Ok(())
}
