use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use pulmocal_cli::config::{ForwardKind, RunConfig};
use pulmocal_cli::io::{read_flow_csv, write_flow_csv};
use pulmocal_cli::preprocess::preprocess_flows;
use pulmocal_cli::stages::{parse_stages, simulate_single, Pipeline, Stage, SyntheticSpec};
use pulmocal_cli::{exit_code, DataError, UsageError, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "pulmocal", version, about = "Pulmonary hemodynamics calibration pipeline")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// Run configuration (JSON).
    #[arg(short, long)]
    config: PathBuf,
    /// Re-run even if the recorded config hash differs.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Shift the MPA flow so its mean matches the summed branch flows.
    Preprocess {
        #[arg(long)]
        mpa: PathBuf,
        #[arg(long)]
        lpa: PathBuf,
        #[arg(long)]
        rpa: PathBuf,
        /// Also lift the waveform so its minimum is zero.
        #[arg(long)]
        floor: bool,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Latin hypercube design over the parameter bounds.
    Design(StageArgs),
    /// Run the solver over the design, or once at --theta.
    Simulate {
        #[command(flatten)]
        stage: StageArgs,
        /// Worker threads for the design map (0 = all cores).
        #[arg(short, long)]
        workers: Option<usize>,
        /// Single run at eta_l,lrr_l,eta_r,lrr_r instead of the design.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        theta: Option<Vec<f64>>,
        /// Waveform CSV for a single run (default: stdout summary only).
        #[arg(long, requires = "theta")]
        out: Option<PathBuf>,
        /// Write noisy synthetic observations from the single run.
        #[arg(long, requires = "theta")]
        synthetic: Option<PathBuf>,
        /// Noise sd as a fraction of each data source's range.
        #[arg(long, default_value_t = 0.02)]
        noise_fraction: f64,
        #[arg(long, default_value_t = 0)]
        noise_seed: u64,
    },
    /// Fit the PCA + GP emulator to the simulations.
    Train {
        #[command(flatten)]
        stage: StageArgs,
        /// Leave out rows tagged non-convergent or non-physiological.
        #[arg(long)]
        exclude_nonphysiological: bool,
    },
    /// Sample the posterior with DRAM.
    Calibrate {
        #[command(flatten)]
        stage: StageArgs,
        /// Use the PDE solver in the loop instead of the emulator.
        #[arg(long)]
        pde: bool,
    },
    /// Credible and prediction bands from the posterior tail.
    Propagate {
        #[command(flatten)]
        stage: StageArgs,
        #[arg(short, long)]
        workers: Option<usize>,
    },
    /// Posterior comparisons, severity metrics and plot data.
    Analyze(StageArgs),
    /// Run several stages in order.
    Pipeline {
        #[command(flatten)]
        stage: StageArgs,
        /// Comma-separated subset (default: all).
        #[arg(long)]
        stages: Option<String>,
        #[arg(short, long)]
        workers: Option<usize>,
    },
}

fn load(args: &StageArgs) -> anyhow::Result<RunConfig> {
    RunConfig::load(&args.config)
}

fn run_stages(mut cfg: RunConfig, force: bool, stages: &[Stage], workers: Option<usize>) -> anyhow::Result<()> {
    if let Some(w) = workers {
        cfg.simulate.workers = w;
        cfg.propagation.workers = w;
    }
    let mut p = Pipeline::new(cfg, force)?;
    for (stage, status) in p.run(stages)? {
        println!("{stage}: {status:?}");
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Preprocess {
            mpa,
            lpa,
            rpa,
            floor,
            out,
        } => {
            let (t, q_mpa) = read_flow_csv(&mpa)?;
            let (tl, q_lpa) = read_flow_csv(&lpa)?;
            let (tr, q_rpa) = read_flow_csv(&rpa)?;
            let same = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9);
            if !same(&t, &tl) || !same(&t, &tr) {
                return Err(DataError("flow series must share their sample times".into()).into());
            }
            let r = preprocess_flows(&q_mpa, &q_lpa, &q_rpa, floor);
            info!("preprocess: mean shift {:.4} mL/s", r.mean_shift);
            if r.floor_shift > 0.0 {
                warn!(
                    "preprocess: floor shift {:.4} mL/s leaves a mean imbalance of {:.4} mL/s",
                    r.floor_shift, r.imbalance
                );
            }
            write_flow_csv(&out, None, &t, &r.q_mpa)?;
            println!("shift {} floor {} imbalance {}", r.mean_shift, r.floor_shift, r.imbalance);
            Ok(())
        }
        Command::Design(a) => run_stages(load(&a)?, a.force, &[Stage::Design], None),
        Command::Simulate {
            stage,
            workers,
            theta,
            out,
            synthetic,
            noise_fraction,
            noise_seed,
        } => {
            let cfg = load(&stage)?;
            match theta {
                Some(theta) => {
                    if theta.len() != 4 {
                        return Err(UsageError("--theta takes four comma-separated values".into()).into());
                    }
                    let spec = synthetic.map(|path| SyntheticSpec {
                        path,
                        noise_fraction,
                        seed: noise_seed,
                    });
                    let sim = simulate_single(&cfg, &theta, out.as_deref(), spec.as_ref())?;
                    let p_max = sim.mpa_pressure.iter().copied().fold(f64::MIN, f64::max);
                    let p_min = sim.mpa_pressure.iter().copied().fold(f64::MAX, f64::min);
                    println!(
                        "converged {} after {} cycles; MPA pressure {p_min:.2}-{p_max:.2} mmHg",
                        sim.converged, sim.cycles_run
                    );
                    Ok(())
                }
                None => run_stages(cfg, stage.force, &[Stage::Simulate], workers),
            }
        }
        Command::Train {
            stage,
            exclude_nonphysiological,
        } => {
            let mut cfg = load(&stage)?;
            cfg.emulator.exclude_nonphysiological |= exclude_nonphysiological;
            run_stages(cfg, stage.force, &[Stage::Train], None)
        }
        Command::Calibrate { stage, pde } => {
            let mut cfg = load(&stage)?;
            if pde {
                cfg.calibration.forward = ForwardKind::Solver;
            }
            run_stages(cfg, stage.force, &[Stage::Calibrate], None)
        }
        Command::Propagate { stage, workers } => run_stages(load(&stage)?, stage.force, &[Stage::Propagate], workers),
        Command::Analyze(a) => run_stages(load(&a)?, a.force, &[Stage::Analyze], None),
        Command::Pipeline { stage, stages, workers } => {
            let list = match stages {
                Some(s) => parse_stages(&s)?,
                None => Stage::ALL.to_vec(),
            };
            run_stages(load(&stage)?, stage.force, &list, workers)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli).context("pulmocal") {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.downcast_ref::<UsageError>().is_some()) {
                return ExitCode::from(EXIT_USAGE as u8);
            }
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
