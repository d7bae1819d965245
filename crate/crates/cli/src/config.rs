use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use pulmocal::calibration::{DramOptions, PriorFamily};
use pulmocal::emulator::EmulatorOptions;
use pulmocal::params::{validate_bounds, Bounds, DEFAULT_BOUNDS};
use pulmocal::solver::SolverOptions;
use serde::{Deserialize, Serialize};

use crate::DataError;

/// Input files and the artifact directory. Relative paths resolve against
/// the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub network: PathBuf,
    /// CSV with columns (time_s, flow_ml_s).
    pub inlet: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations: Option<PathBuf>,
    pub artifacts: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    pub n: usize,
    pub seed: u64,
    pub bounds: Vec<Bounds>,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            n: 500,
            seed: 1,
            bounds: DEFAULT_BOUNDS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Worker threads for the design map; 0 uses every core.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub options: EmulatorOptions,
    pub holdout_fraction: f64,
    pub split_seed: u64,
    /// Drop rows tagged non-convergent or above the pressure limit.
    pub exclude_nonphysiological: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            options: EmulatorOptions::default(),
            holdout_fraction: 0.05,
            split_seed: 7,
            exclude_nonphysiological: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardKind {
    #[default]
    Emulator,
    /// Full solver in the loop.
    Solver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// One chain per family; the first is the primary posterior.
    pub priors: Vec<PriorFamily>,
    pub forward: ForwardKind,
    pub dram: DramOptions,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            priors: vec![PriorFamily::Gaussian],
            forward: ForwardKind::Emulator,
            dram: DramOptions {
                seed: 11,
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationConfig {
    pub n_tail: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        Self {
            n_tail: 1000,
            seed: 3,
            workers: 0,
        }
    }
}

/// Artifact directories of one subject before and after disease onset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CohortPair {
    pub name: String,
    pub baseline: PathBuf,
    pub disease: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub histogram_bins: usize,
    pub cohort: Vec<CohortPair>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            histogram_bins: 40,
            cohort: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsConfig,
    #[serde(default)]
    pub design: DesignConfig,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub emulator: TrainConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DataError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| DataError(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.network);
        fix(&mut self.paths.inlet);
        fix(&mut self.paths.artifacts);
        if let Some(p) = self.paths.observations.as_mut() {
            fix(p);
        }
        for c in &mut self.analysis.cohort {
            fix(&mut c.baseline);
            fix(&mut c.disease);
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        validate_bounds(&self.design.bounds).context("design bounds")?;
        if self.design.bounds.len() != DEFAULT_BOUNDS.len() {
            bail!(DataError(format!("design needs {} bounds", DEFAULT_BOUNDS.len())));
        }
        if self.design.n < 2 {
            bail!(DataError("design needs at least two points".into()));
        }
        if !(0.0..1.0).contains(&self.emulator.holdout_fraction) {
            bail!(DataError("holdout fraction must lie in [0, 1)".into()));
        }
        if self.calibration.priors.is_empty() {
            bail!(DataError("at least one prior family is required".into()));
        }
        Ok(())
    }
}

pub fn prior_name(family: PriorFamily) -> &'static str {
    match family {
        PriorFamily::Gaussian => "gaussian",
        PriorFamily::Uniform => "uniform",
    }
}
