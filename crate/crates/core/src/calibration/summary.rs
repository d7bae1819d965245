use std::io::Write;

use serde::{Deserialize, Serialize};

use super::dram::PosteriorChain;
use super::geweke::geweke_test;
use super::likelihood::SOURCES;
use super::propagate::quantile_sorted;
use crate::error::Result;
use crate::params::PARAM_NAMES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

impl MarginalSummary {
    fn of(name: &str, series: &[f64]) -> Self {
        let mut s = series.to_vec();
        s.sort_by(f64::total_cmp);
        Self {
            name: name.to_string(),
            mean: series.iter().sum::<f64>() / series.len() as f64,
            median: quantile_sorted(&s, 0.5),
            ci_lower: quantile_sorted(&s, 0.025),
            ci_upper: quantile_sorted(&s, 0.975),
        }
    }

    pub fn covers(&self, x: f64) -> bool {
        x >= self.ci_lower && x <= self.ci_upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    #[serde(flatten)]
    pub marginal: MarginalSummary,
    pub geweke_z: f64,
    pub geweke_p: f64,
}

/// Post-burn-in posterior report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub iterations: usize,
    pub burn_in: usize,
    pub acceptance_rate: f64,
    pub parameters: Vec<ParameterSummary>,
    pub noise: Vec<MarginalSummary>,
}

impl CalibrationSummary {
    pub fn from_chain(chain: &PosteriorChain) -> Result<Self> {
        let parameters = (0..chain.samples[0].len())
            .map(|k| {
                let s = chain.series(k);
                let g = geweke_test(&s)?;
                Ok(ParameterSummary {
                    marginal: MarginalSummary::of(PARAM_NAMES.get(k).copied().unwrap_or("theta"), &s),
                    geweke_z: g.z,
                    geweke_p: g.p,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let kept = &chain.auxiliary[chain.burn_in..];
        let noise = (0..kept.first().map_or(0, |a| a.len()))
            .map(|s| {
                let series: Vec<f64> = kept.iter().map(|a| a[s]).collect();
                MarginalSummary::of(&format!("sigma2_{}", SOURCES.get(s).copied().unwrap_or("aux")), &series)
            })
            .collect();
        Ok(Self {
            iterations: chain.len(),
            burn_in: chain.burn_in,
            acceptance_rate: chain.acceptance_rate(),
            parameters,
            noise,
        })
    }

    pub fn parameter(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.marginal.name == name)
    }
}

/// One row per iteration: index, θ, noise variances, log-posterior, accepted.
pub fn write_chain_csv<W: Write>(chain: &PosteriorChain, mut out: W) -> std::io::Result<()> {
    let mut header: Vec<String> = vec!["iteration".into()];
    header.extend(PARAM_NAMES.iter().map(|s| s.to_string()));
    header.extend(["s2_press", "s2_lpa", "s2_rpa", "s2_strain"].iter().map(|s| s.to_string()));
    header.push("logpost".into());
    header.push("accepted".into());
    writeln!(out, "{}", header.join(","))?;
    for i in 0..chain.len() {
        let mut row = vec![i.to_string()];
        row.extend(chain.samples[i].iter().map(|v| v.to_string()));
        row.extend(chain.auxiliary[i].iter().map(|v| v.to_string()));
        row.push(chain.log_post[i].to_string());
        row.push(u8::from(chain.accepted[i]).to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Inverse of [`write_chain_csv`]; lines starting with `#` are skipped.
pub fn read_chain_csv(text: &str, burn_in: usize) -> Result<PosteriorChain> {
    let bad = |m: String| crate::Error::InvalidInput(format!("chain CSV: {m}"));
    let mut chain = PosteriorChain {
        samples: Vec::new(),
        auxiliary: Vec::new(),
        log_post: Vec::new(),
        accepted: Vec::new(),
        burn_in,
    };
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let cols = header.split(',').count();
    let d = PARAM_NAMES.len();
    if cols != d + 4 + 3 {
        return Err(bad(format!("expected {} columns, found {cols}", d + 7)));
    }
    for (n, line) in lines.enumerate() {
        let v: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("row {n}: {e}")))?;
        if v.len() != cols {
            return Err(bad(format!("row {n} has {} fields", v.len())));
        }
        chain.samples.push(v[1..=d].to_vec());
        chain.auxiliary.push(v[d + 1..d + 5].to_vec());
        chain.log_post.push(v[d + 5]);
        chain.accepted.push(v[d + 6] != 0.0);
    }
    if chain.burn_in >= chain.len() {
        return Err(bad(format!("burn-in {burn_in} leaves no draws from {} rows", chain.len())));
    }
    Ok(chain)
}
