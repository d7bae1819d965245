//! The pipeline stages and their artifact contracts.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use log::{info, warn};
use pulmocal::analysis::{
    compare_posteriors, flow_split, write_band_csv, write_histograms_csv, CorrelationReport, PosteriorComparison,
    SeverityMetrics,
};
use pulmocal::calibration::{
    dram_sample, propagate_uncertainty, read_chain_csv, source_range, write_chain_csv, Band, CalibrationSummary,
    CalibrationTarget, EmulatorForward, ForwardModel, NoiseModel, PosteriorChain, PriorFamily, PriorSpec, Propagation,
    SolverForward,
};
use pulmocal::emulator::{holdout_split, lhs_design, relative_rmse, EmulatorModel};
use pulmocal::network::{parse_network, ArterialNetwork};
use pulmocal::params::{ParameterVector, PARAM_NAMES};
use pulmocal::solver::{likelihood_vector_from_model, simulate, InletFlow, SimulationOutput, N_SAMPLES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{read_json, write_json, write_text, ArtifactDir, Freshness, Meta, StageHasher};
use crate::config::{prior_name, ForwardKind, RunConfig};
use crate::io::{
    read_design_csv, read_inlet, read_observations, read_simulations_csv, write_design_csv, write_observations,
    write_simulations_csv, write_waveforms_csv, ObservationFile, SimulationRow,
};
use crate::{DataError, UsageError};

pub const DESIGN_FILE: &str = "design.csv";
pub const SIMULATIONS_FILE: &str = "simulations.csv";
pub const EMULATOR_FILE: &str = "emulator.json";
pub const EMULATOR_REPORT_FILE: &str = "emulator_report.json";
pub const PROPAGATION_FILE: &str = "propagation.json";
pub const REPORT_FILE: &str = "report.json";

/// Names of the four model-output signals, in model-vector order.
pub const SIGNALS: [&str; 4] = ["pressure", "lpa_flow", "rpa_flow", "area"];

pub fn chain_file(prior: PriorFamily) -> String {
    format!("chain_{}.csv", prior_name(prior))
}

pub fn summary_file(prior: PriorFamily) -> String {
    format!("summary_{}.json", prior_name(prior))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Design,
    Simulate,
    Train,
    Calibrate,
    Propagate,
    Analyze,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Design,
        Stage::Simulate,
        Stage::Train,
        Stage::Calibrate,
        Stage::Propagate,
        Stage::Analyze,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Design => "design",
            Stage::Simulate => "simulate",
            Stage::Train => "train",
            Stage::Calibrate => "calibrate",
            Stage::Propagate => "propagate",
            Stage::Analyze => "analyze",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| UsageError(format!("unknown stage '{s}'")))
    }
}

/// Comma-separated stage list, returned in pipeline order.
pub fn parse_stages(list: &str) -> Result<Vec<Stage>, UsageError> {
    let mut stages = list.split(',').map(Stage::from_str).collect::<Result<Vec<_>, _>>()?;
    stages.sort();
    stages.dedup();
    Ok(stages)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmulatorReport {
    pub n_rows: usize,
    pub n_excluded: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub test_rows: Vec<usize>,
    pub n_components: usize,
    pub explained_variance: f64,
    pub component_variance: Vec<f64>,
    /// Held-out RMSE over RMS of the truth, per signal.
    pub relative_rmse: Vec<f64>,
    pub nll_initial: Vec<f64>,
    pub nll_final: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub prior: PriorFamily,
    pub prior_spec: PriorSpec,
    pub forward: ForwardKind,
    pub initial_noise: NoiseModel,
    pub forward_failures: usize,
    pub summary: CalibrationSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropagationReport {
    pub prior: PriorFamily,
    pub propagation: Propagation,
    /// Fraction of the 107 observations inside each band.
    pub credible_coverage: f64,
    pub prediction_coverage: f64,
    /// From the posterior median waveforms.
    pub severity: SeverityMetrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorComparison {
    pub prior_a: PriorFamily,
    pub prior_b: PriorFamily,
    pub n_draws: usize,
    pub parameters: Vec<PosteriorComparison>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortChange {
    pub name: String,
    /// Relative change of each posterior-mean parameter.
    pub parameters: Vec<f64>,
    pub flow_split: f64,
    pub mpap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortReport {
    pub changes: Vec<CohortChange>,
    pub correlation: Option<CorrelationReport>,
    pub strong: Vec<(String, String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub observed_flow_split: f64,
    pub predicted: SeverityMetrics,
    pub posteriors: Vec<(PriorFamily, CalibrationSummary)>,
    pub prior_comparisons: Vec<PriorComparison>,
    pub cohort: Option<CohortReport>,
}

/// Synthetic observations for twin studies.
pub struct SyntheticSpec {
    pub path: PathBuf,
    /// Noise sd as a fraction of each source's range.
    pub noise_fraction: f64,
    pub seed: u64,
}

/// Adds N(0, (f·range_s)²) noise per data source to a likelihood vector.
pub fn add_source_noise(clean: &[f64], fraction: f64, seed: u64) -> (Vec<f64>, [f64; 4]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noisy = clean.to_vec();
    let mut sds = [0.0; 4];
    for (s, sd) in sds.iter_mut().enumerate() {
        let r = source_range(s);
        let block = &clean[r.clone()];
        let hi = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = block.iter().copied().fold(f64::INFINITY, f64::min);
        *sd = fraction * (hi - lo);
        if *sd > 0.0 {
            let n = Normal::new(0.0, *sd).expect("finite noise sd");
            for v in &mut noisy[r] {
                *v += n.sample(&mut rng);
            }
        }
    }
    (noisy, sds)
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    Ok(pool.install(f))
}

fn sub_band(b: &Band, r: std::ops::Range<usize>) -> Band {
    Band {
        lower: b.lower[r.clone()].to_vec(),
        median: b.median[r.clone()].to_vec(),
        upper: b.upper[r].to_vec(),
    }
}

fn severity_of(model: &[f64]) -> anyhow::Result<SeverityMetrics> {
    let n = N_SAMPLES;
    Ok(SeverityMetrics::from_signals(&model[..n], &model[n..2 * n], &model[2 * n..3 * n])?)
}

fn numerical(msg: String) -> anyhow::Error {
    pulmocal::Error::Numerical(msg).into()
}

fn require_file(path: &Path, what: &str) -> anyhow::Result<()> {
    if !path.exists() {
        bail!(DataError(format!("{what} not found: {}", path.display())));
    }
    Ok(())
}

pub fn load_network(cfg: &RunConfig) -> anyhow::Result<ArterialNetwork> {
    let p = &cfg.paths.network;
    require_file(p, "network config")?;
    let text = fs::read_to_string(p)?;
    parse_network(&text).with_context(|| format!("network {}", p.display()))
}

pub fn load_inlet(cfg: &RunConfig, net: &ArterialNetwork) -> anyhow::Result<InletFlow> {
    require_file(&cfg.paths.inlet, "inlet flow")?;
    read_inlet(&cfg.paths.inlet, net.period)
}

pub struct Pipeline {
    pub cfg: RunConfig,
    pub art: ArtifactDir,
    pub force: bool,
}

impl Pipeline {
    pub fn new(cfg: RunConfig, force: bool) -> anyhow::Result<Self> {
        let art = ArtifactDir::open(&cfg.paths.artifacts)?;
        Ok(Self { cfg, art, force })
    }

    pub fn run(&mut self, stages: &[Stage]) -> anyhow::Result<Vec<(Stage, Freshness)>> {
        let mut out = Vec::new();
        for &s in stages {
            let status = match s {
                Stage::Design => self.design()?,
                Stage::Simulate => self.simulate_design()?,
                Stage::Train => self.train()?,
                Stage::Calibrate => self.calibrate()?,
                Stage::Propagate => self.propagate()?,
                Stage::Analyze => self.analyze()?,
            };
            out.push((s, status));
        }
        Ok(out)
    }

    pub fn network(&self) -> anyhow::Result<ArterialNetwork> {
        load_network(&self.cfg)
    }

    pub fn inlet(&self, net: &ArterialNetwork) -> anyhow::Result<InletFlow> {
        load_inlet(&self.cfg, net)
    }

    pub fn observations(&self) -> anyhow::Result<ObservationFile> {
        let p = self
            .cfg
            .paths
            .observations
            .as_ref()
            .ok_or_else(|| DataError("no observation file configured".into()))?;
        require_file(p, "observations")?;
        read_observations(p)
    }

    fn skip(&self, stage: Stage, hash: &str) -> anyhow::Result<bool> {
        let fresh = self.art.freshness(stage.name(), hash, self.force)?;
        if fresh == Freshness::UpToDate {
            info!("{stage}: up to date");
        }
        Ok(fresh == Freshness::UpToDate)
    }

    fn upstream_hash(&self, stage: Stage, artifact: &str) -> anyhow::Result<String> {
        Ok(self.art.require(stage.name(), artifact)?.config_hash.clone())
    }

    pub fn design(&mut self) -> anyhow::Result<Freshness> {
        let hash = StageHasher::new("design").value("design", &self.cfg.design).finish();
        if self.skip(Stage::Design, &hash)? {
            return Ok(Freshness::UpToDate);
        }
        let d = &self.cfg.design;
        let design = lhs_design(&d.bounds, d.n, d.seed)?;
        let meta = Meta::new("design", Some(d.seed), &hash);
        write_design_csv(&self.art.path(DESIGN_FILE), &meta, &design.points)?;
        self.art.commit("design", &meta, &[DESIGN_FILE.into()])?;
        info!("design: {} points written", design.points.len());
        Ok(Freshness::Stale)
    }

    fn solver_inputs_hash(&self, h: &mut StageHasher) -> anyhow::Result<()> {
        require_file(&self.cfg.paths.network, "network config")?;
        require_file(&self.cfg.paths.inlet, "inlet flow")?;
        h.file("network", &self.cfg.paths.network)?
            .file("inlet", &self.cfg.paths.inlet)?
            .value("solver", &self.cfg.solver);
        Ok(())
    }

    pub fn simulate_design(&mut self) -> anyhow::Result<Freshness> {
        let up = self.upstream_hash(Stage::Design, "design")?;
        let mut h = StageHasher::new("simulate");
        h.text("design", &up);
        self.solver_inputs_hash(&mut h)?;
        let hash = h.finish();
        if self.skip(Stage::Simulate, &hash)? {
            return Ok(Freshness::UpToDate);
        }
        let net = self.network()?;
        let inlet = self.inlet(&net)?;
        let design = read_design_csv(&self.art.path(DESIGN_FILE))?;
        let opts = self.cfg.solver.clone();
        info!("simulate: {} runs", design.len());
        let rows: Vec<SimulationRow> = with_workers(self.cfg.simulate.workers, || {
            design
                .par_iter()
                .map(|theta| {
                    let run = ParameterVector::from_slice(theta).and_then(|p| simulate(&net, &p, &inlet, &opts));
                    match run {
                        Ok(out) => SimulationRow {
                            converged: out.converged,
                            physiological: out.is_physiological(),
                            error: None,
                            values: out.model_vector(),
                        },
                        Err(e) => SimulationRow {
                            converged: false,
                            physiological: false,
                            error: Some(e.to_string().replace([',', '\n', '"'], ";")),
                            values: Vec::new(),
                        },
                    }
                })
                .collect()
        })?;
        let failed = rows.iter().filter(|r| r.error.is_some()).count();
        let tagged = rows.iter().filter(|r| r.error.is_none() && !r.physiological).count();
        if failed == rows.len() {
            return Err(numerical(format!("all {failed} design simulations failed")));
        }
        if failed > 0 || tagged > 0 {
            warn!("simulate: {failed} runs failed, {tagged} tagged non-physiological");
        }
        let meta = Meta::new("simulate", Some(self.cfg.design.seed), &hash);
        write_simulations_csv(&self.art.path(SIMULATIONS_FILE), &meta, &rows)?;
        self.art.commit("simulate", &meta, &[SIMULATIONS_FILE.into()])?;
        Ok(Freshness::Stale)
    }

    pub fn train(&mut self) -> anyhow::Result<Freshness> {
        let up = self.upstream_hash(Stage::Simulate, "simulations")?;
        let hash = StageHasher::new("train")
            .text("simulate", &up)
            .value("emulator", &self.cfg.emulator)
            .value("bounds", &self.cfg.design.bounds)
            .finish();
        if self.skip(Stage::Train, &hash)? {
            return Ok(Freshness::UpToDate);
        }
        let tc = &self.cfg.emulator;
        let design = read_design_csv(&self.art.path(DESIGN_FILE))?;
        let rows = read_simulations_csv(&self.art.path(SIMULATIONS_FILE))?;
        if rows.len() != design.len() {
            bail!(DataError("design and simulation row counts differ".into()));
        }
        let usable: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].usable(tc.exclude_nonphysiological)).collect();
        if usable.len() < 3 {
            bail!(DataError(format!("only {} usable simulation rows", usable.len())));
        }
        let (train_idx, test_idx) = if tc.holdout_fraction > 0.0 {
            holdout_split(usable.len(), tc.holdout_fraction, tc.split_seed)
        } else {
            ((0..usable.len()).collect(), Vec::new())
        };
        let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
            idx.iter()
                .map(|&k| (design[usable[k]].clone(), rows[usable[k]].values.clone()))
                .unzip()
        };
        let (x_train, y_train) = pick(&train_idx);
        let (x_test, y_test) = pick(&test_idx);
        info!("train: {} rows, {} held out", x_train.len(), x_test.len());
        let model = EmulatorModel::train(&x_train, &y_train, &self.cfg.design.bounds, &tc.options)?;
        let predicted: Vec<Vec<f64>> = x_test.iter().map(|x| model.predict_mean(x)).collect();
        let rmse = if x_test.is_empty() {
            Vec::new()
        } else {
            relative_rmse(&predicted, &y_test, SIGNALS.len())
        };
        let report = EmulatorReport {
            n_rows: rows.len(),
            n_excluded: rows.len() - usable.len(),
            n_train: x_train.len(),
            n_test: x_test.len(),
            test_rows: test_idx.iter().map(|&k| usable[k]).collect(),
            n_components: model.n_components(),
            explained_variance: model.pca.cumulative_explained(),
            component_variance: model.pca.explained(),
            relative_rmse: rmse,
            nll_initial: model.gps.iter().map(|g| g.nll_initial).collect(),
            nll_final: model.gps.iter().map(|g| g.nll_final).collect(),
        };
        for (s, e) in SIGNALS.iter().zip(&report.relative_rmse) {
            info!("train: held-out relative RMSE {s} = {e:.4}");
        }
        let meta = Meta::new("train", Some(tc.split_seed), &hash);
        write_json(&self.art.path(EMULATOR_FILE), &meta, &model)?;
        write_json(&self.art.path(EMULATOR_REPORT_FILE), &meta, &report)?;
        self.art
            .commit("train", &meta, &[EMULATOR_FILE.into(), EMULATOR_REPORT_FILE.into()])?;
        Ok(Freshness::Stale)
    }

    pub fn load_emulator(&self) -> anyhow::Result<EmulatorModel> {
        self.art.require("train", "emulator")?;
        let (_, model): (Meta, EmulatorModel) = read_json(&self.art.path(EMULATOR_FILE))?;
        Ok(model.restore()?)
    }

    /// Hash of whatever the forward model depends on.
    fn forward_hash(&self, h: &mut StageHasher) -> anyhow::Result<()> {
        match self.cfg.calibration.forward {
            ForwardKind::Emulator => {
                let up = self.upstream_hash(Stage::Train, "emulator")?;
                h.text("train", &up);
            }
            ForwardKind::Solver => self.solver_inputs_hash(h)?,
        }
        Ok(())
    }

    fn with_forward<T>(&self, f: impl FnOnce(&dyn ForwardModel) -> anyhow::Result<T>) -> anyhow::Result<T> {
        let net = self.network()?;
        let a_dia = net.vessels[net.inlet].area_dia();
        match self.cfg.calibration.forward {
            ForwardKind::Emulator => {
                let model = self.load_emulator()?;
                f(&EmulatorForward { model: &model, a_dia })
            }
            ForwardKind::Solver => {
                let inlet = self.inlet(&net)?;
                f(&SolverForward {
                    network: &net,
                    inlet: &inlet,
                    options: self.cfg.solver.clone(),
                })
            }
        }
    }

    fn calibrate_hash(&self) -> anyhow::Result<String> {
        let mut h = StageHasher::new("calibrate");
        self.forward_hash(&mut h)?;
        let obs = self
            .cfg
            .paths
            .observations
            .as_ref()
            .ok_or_else(|| DataError("no observation file configured".into()))?;
        require_file(obs, "observations")?;
        h.file("observations", obs)?
            .value("calibration", &self.cfg.calibration)
            .value("bounds", &self.cfg.design.bounds);
        Ok(h.finish())
    }

    pub fn calibrate(&mut self) -> anyhow::Result<Freshness> {
        let hash = self.calibrate_hash()?;
        if self.skip(Stage::Calibrate, &hash)? {
            return Ok(Freshness::UpToDate);
        }
        let obs = self.observations()?;
        let cc = self.cfg.calibration.clone();
        let bounds = self.cfg.design.bounds.clone();
        let mut outputs = Vec::new();
        let meta = Meta::new("calibrate", Some(cc.dram.seed), &hash);
        for &family in &cc.priors {
            let prior = PriorSpec::from_family(family, &bounds)?;
            let noise = NoiseModel::default_for(&obs.data);
            info!("calibrate: {} prior, {} iterations", prior_name(family), cc.dram.iterations);
            let (chain, failures) = self.with_forward(|fwd| {
                let mut target = CalibrationTarget::new(fwd, &obs.data, prior.clone(), noise.clone());
                let chain = dram_sample(&mut target, &prior.initial(), &prior.ranges(), &cc.dram)?;
                Ok((chain, target.failures()))
            })?;
            let summary = CalibrationSummary::from_chain(&chain)?;
            info!("calibrate: acceptance rate {:.3}", summary.acceptance_rate);
            let mut buf = Vec::new();
            write_chain_csv(&chain, &mut buf)?;
            write_text(&self.art.path(&chain_file(family)), &meta, &buf)?;
            let report = CalibrationReport {
                prior: family,
                prior_spec: prior,
                forward: cc.forward,
                initial_noise: noise,
                forward_failures: failures,
                summary,
            };
            write_json(&self.art.path(&summary_file(family)), &meta, &report)?;
            outputs.push(chain_file(family));
            outputs.push(summary_file(family));
        }
        self.art.commit("calibrate", &meta, &outputs)?;
        Ok(Freshness::Stale)
    }

    pub fn load_chain(&self, family: PriorFamily) -> anyhow::Result<PosteriorChain> {
        self.art.require("calibrate", "chain")?;
        let path = self.art.path(&chain_file(family));
        let text = fs::read_to_string(&path).map_err(|_| DataError(format!("missing artifact: {}", chain_file(family))))?;
        Ok(read_chain_csv(&text, self.cfg.calibration.dram.burn_in)?)
    }

    pub fn propagate(&mut self) -> anyhow::Result<Freshness> {
        let up = self.upstream_hash(Stage::Calibrate, "chain")?;
        let mut h = StageHasher::new("propagate");
        h.text("calibrate", &up)
            .value("n_tail", &self.cfg.propagation.n_tail)
            .value("seed", &self.cfg.propagation.seed);
        self.forward_hash(&mut h)?;
        let hash = h.finish();
        if self.skip(Stage::Propagate, &hash)? {
            return Ok(Freshness::UpToDate);
        }
        let pc = self.cfg.propagation.clone();
        let family = self.cfg.calibration.priors[0];
        let chain = self.load_chain(family)?;
        let obs = self.observations()?;
        let n_tail = pc.n_tail.min(chain.len() - chain.burn_in);
        let prop = with_workers(pc.workers, || {
            self.with_forward(|fwd| Ok(propagate_uncertainty(&chain, fwd, n_tail, pc.seed)?))
        })??;
        let data = obs.data.to_vector();
        let report = PropagationReport {
            prior: family,
            credible_coverage: prop.credible.coverage(&data),
            prediction_coverage: prop.prediction.coverage(&data),
            severity: severity_of(&prop.waveform_credible.median)?,
            propagation: prop,
        };
        info!(
            "propagate: {} draws, prediction band covers {:.1}% of data",
            n_tail,
            100.0 * report.prediction_coverage
        );
        let meta = Meta::new("propagate", Some(pc.seed), &hash);
        write_json(&self.art.path(PROPAGATION_FILE), &meta, &report)?;
        let mut outputs = vec![PROPAGATION_FILE.to_string()];

        let net = self.network()?;
        let a_dia = net.vessels[net.inlet].area_dia();
        let times = &obs.times;
        let area_data: Vec<f64> = obs.data.strain.iter().map(|e| a_dia * (1.0 + e / 100.0)).collect();
        let signal_data: [Option<&[f64]>; 4] = [None, Some(&obs.data.q_lpa), Some(&obs.data.q_rpa), Some(&area_data)];
        for (s, name) in SIGNALS.iter().enumerate() {
            let r = s * N_SAMPLES..(s + 1) * N_SAMPLES;
            let mut buf = Vec::new();
            write_band_csv(
                times,
                &sub_band(&report.propagation.waveform_credible, r.clone()),
                &sub_band(&report.propagation.waveform_prediction, r),
                signal_data[s],
                &mut buf,
            )?;
            let rel = format!("plots/waveform_{name}.csv");
            write_text(&self.art.path(&rel), &meta, &buf)?;
            outputs.push(rel);
        }
        let mut buf = Vec::new();
        let index: Vec<f64> = (0..data.len()).map(|i| i as f64).collect();
        write_band_csv(
            &index,
            &report.propagation.credible,
            &report.propagation.prediction,
            Some(&data),
            &mut buf,
        )?;
        write_text(&self.art.path("plots/likelihood_bands.csv"), &meta, &buf)?;
        outputs.push("plots/likelihood_bands.csv".into());
        self.art.commit("propagate", &meta, &outputs)?;
        Ok(Freshness::Stale)
    }

    pub fn analyze(&mut self) -> anyhow::Result<Freshness> {
        let up = self.upstream_hash(Stage::Propagate, "propagation")?;
        let mut h = StageHasher::new("analyze");
        h.text("propagate", &up)
            .text("calibrate", &self.upstream_hash(Stage::Calibrate, "chain")?)
            .value("analysis", &self.cfg.analysis);
        for c in &self.cfg.analysis.cohort {
            for dir in [&c.baseline, &c.disease] {
                h.file("cohort", &dir.join(crate::artifacts::MANIFEST_FILE))?;
            }
        }
        let hash = h.finish();
        if self.skip(Stage::Analyze, &hash)? {
            return Ok(Freshness::UpToDate);
        }
        let obs = self.observations()?;
        let (_, prop): (Meta, PropagationReport) = read_json(&self.art.path(PROPAGATION_FILE))?;
        let priors = self.cfg.calibration.priors.clone();
        let chains = priors
            .iter()
            .map(|&p| self.load_chain(p))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let meta = Meta::new("analyze", None, &hash);
        let mut outputs = Vec::new();

        let mut comparisons = Vec::new();
        for i in 0..chains.len() {
            for j in i + 1..chains.len() {
                let n = (chains[i].len() - chains[i].burn_in).min(chains[j].len() - chains[j].burn_in);
                comparisons.push(PriorComparison {
                    prior_a: priors[i],
                    prior_b: priors[j],
                    n_draws: n,
                    parameters: compare_posteriors(&chains[i], &chains[j], n)?,
                });
            }
        }
        for (k, name) in PARAM_NAMES.iter().enumerate() {
            let series: Vec<(String, Vec<f64>)> =
                priors.iter().zip(&chains).map(|(&p, c)| (prior_name(p).to_string(), c.series(k))).collect();
            let refs: Vec<(&str, &[f64])> = series.iter().map(|(n, s)| (n.as_str(), s.as_slice())).collect();
            let mut buf = Vec::new();
            write_histograms_csv(&refs, self.cfg.analysis.histogram_bins, &mut buf)?;
            let rel = format!("plots/posterior_{name}.csv");
            write_text(&self.art.path(&rel), &meta, &buf)?;
            outputs.push(rel);
        }

        let cohort = if self.cfg.analysis.cohort.is_empty() {
            None
        } else {
            let report = self.cohort_report(priors[0])?;
            if let Some(c) = &report.correlation {
                let mut buf = Vec::new();
                c.write_csv(&mut buf)?;
                write_text(&self.art.path("plots/correlation.csv"), &meta, &buf)?;
                outputs.push("plots/correlation.csv".into());
            }
            Some(report)
        };

        let posteriors = chains
            .iter()
            .zip(&priors)
            .map(|(c, &p)| Ok((p, CalibrationSummary::from_chain(c)?)))
            .collect::<anyhow::Result<Vec<_>>>()?;
        let report = AnalysisReport {
            observed_flow_split: flow_split(&obs.data.q_lpa, &obs.data.q_rpa)?,
            predicted: prop.severity,
            posteriors,
            prior_comparisons: comparisons,
            cohort,
        };
        write_json(&self.art.path(REPORT_FILE), &meta, &report)?;
        outputs.push(REPORT_FILE.into());
        self.art.commit("analyze", &meta, &outputs)?;
        Ok(Freshness::Stale)
    }

    fn cohort_report(&self, family: PriorFamily) -> anyhow::Result<CohortReport> {
        let load = |dir: &Path| -> anyhow::Result<(Vec<f64>, SeverityMetrics)> {
            let (_, cal): (Meta, CalibrationReport) = read_json(&dir.join(summary_file(family)))?;
            let (_, prop): (Meta, PropagationReport) = read_json(&dir.join(PROPAGATION_FILE))?;
            Ok((cal.summary.parameters.iter().map(|p| p.marginal.mean).collect(), prop.severity))
        };
        let mut changes = Vec::new();
        for pair in &self.cfg.analysis.cohort {
            let (theta_b, sev_b) = load(&pair.baseline)?;
            let (theta_d, sev_d) = load(&pair.disease)?;
            let parameters = theta_b
                .iter()
                .zip(&theta_d)
                .map(|(b, d)| pulmocal::analysis::relative_change(*b, *d))
                .collect::<pulmocal::Result<Vec<_>>>()?;
            let (fs, mp) = sev_b.relative_change(&sev_d)?;
            changes.push(CohortChange {
                name: pair.name.clone(),
                parameters,
                flow_split: fs,
                mpap: mp,
            });
        }
        let correlation = if changes.len() >= 3 {
            let rows: Vec<(&str, Vec<f64>)> = PARAM_NAMES
                .iter()
                .enumerate()
                .map(|(k, n)| (*n, changes.iter().map(|c| c.parameters[k]).collect()))
                .collect();
            let cols = [
                ("flow_split", changes.iter().map(|c| c.flow_split).collect()),
                ("mpap", changes.iter().map(|c| c.mpap).collect()),
            ];
            match CorrelationReport::new(&rows, &cols) {
                Ok(r) => Some(r),
                Err(e) => {
                    warn!("analyze: correlation skipped: {e}");
                    None
                }
            }
        } else {
            warn!("analyze: correlations need at least three cohort pairs");
            None
        };
        let strong = correlation.as_ref().map(|c| c.strong()).unwrap_or_default();
        Ok(CohortReport {
            changes,
            correlation,
            strong,
        })
    }
}

/// One solver run at θ, optionally writing noisy synthetic observations.
pub fn simulate_single(
    cfg: &RunConfig,
    theta: &[f64],
    out: Option<&Path>,
    synthetic: Option<&SyntheticSpec>,
) -> anyhow::Result<SimulationOutput> {
    let net = load_network(cfg)?;
    let inlet = load_inlet(cfg, &net)?;
    let theta = ParameterVector::from_slice(theta)?;
    let sim = simulate(&net, &theta, &inlet, &cfg.solver)?;
    if !sim.converged {
        warn!("simulate: periodic state not reached in {} cycles", sim.cycles_run);
    }
    if let Some(path) = out {
        write_waveforms_csv(path, None, &sim, net.period)?;
    }
    if let Some(spec) = synthetic {
        let a_dia = net.vessels[net.inlet].area_dia();
        let clean = likelihood_vector_from_model(&sim.model_vector(), a_dia)?;
        let (noisy, sds) = add_source_noise(&clean, spec.noise_fraction, spec.seed);
        info!("simulate: synthetic noise sd per source {sds:?}");
        let obs = ObservationFile {
            times: sim.sample_times(net.period),
            data: pulmocal::calibration::ObservationVector::from_vector(&noisy)?,
        };
        let hash = StageHasher::new("synthetic")
            .file("network", &cfg.paths.network)?
            .file("inlet", &cfg.paths.inlet)?
            .value("solver", &cfg.solver)
            .value("theta", &theta)
            .value("noise_fraction", &spec.noise_fraction)
            .finish();
        write_observations(&spec.path, Some(&Meta::new("synthetic", Some(spec.seed), &hash)), &obs)?;
    }
    Ok(sim)
}
