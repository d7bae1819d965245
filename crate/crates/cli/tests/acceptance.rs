//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.
//!
//! The desk-scale twin study caches its artifacts under the cargo target tmp
//! directory, so reruns only redo stages whose inputs changed. Set
//! `PULMOCAL_ACCEPTANCE_FRESH=1` to start from an empty artifact directory.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use pulmocal::calibration::{
    dram_sample, geweke_test, source_range, DramOptions, NoiseModel, PriorFamily, SOURCE_SIZES,
};
use pulmocal::emulator::fit_pca;
use pulmocal::network::{parse_network, FluidConstants};
use pulmocal::params::{ParameterVector, DEFAULT_BOUNDS};
use pulmocal::solver::{simulate_detailed, InletFlow, SolverOptions, LIKELIHOOD_LEN};
use pulmocal::tree::{alpha_beta, root_impedance_spectrum, vessel_radius, StructuredTreeSpec};
use pulmocal::units::MMHG_TO_CGS;
use pulmocal_cli::artifacts::{read_json, Freshness, Meta};
use pulmocal_cli::config::RunConfig;
use pulmocal_cli::io::{read_observations, read_simulations_csv};
use pulmocal_cli::stages::{
    simulate_single, summary_file, AnalysisReport, CalibrationReport, EmulatorReport, Pipeline, PropagationReport,
    Stage, SyntheticSpec, EMULATOR_REPORT_FILE, PROPAGATION_FILE, REPORT_FILE, SIGNALS, SIMULATIONS_FILE,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type Check = Result<String, String>;

const THETA_STAR: [f64; 4] = [2.3, 20.0, 2.5, 30.0];

fn desk_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/desk")
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_s: f64, detail: String) -> Check {
    let s = elapsed.as_secs_f64();
    ensure(s < limit_s, format!("{detail}; {s:.1} s (limit {limit_s} s)"))
}

fn theta() -> ParameterVector {
    ParameterVector::from_slice(&THETA_STAR).unwrap()
}

fn steady_viscous_drop() -> Check {
    let t0 = Instant::now();
    let (l, r, q0, mu) = (10.0, 0.3, 5.0, 0.035);
    let mut lines = Vec::new();
    let mut ok = true;
    for gamma in [5.0, 2.0] {
        let net = parse_network(&format!(
            r#"{{"period_s": 0.5, "p_dia_mmHg": 8, "stiffness_mmHg": 20000,
                "fluid": {{"density": 1.055, "viscosity": {mu}, "profile_exponent": {gamma}}},
                "vessels": [{{"id": "A", "length_cm": {l}, "radius_cm": {r}, "side": "left"}}]}}"#
        ))
        .map_err(|e| e.to_string())?;
        let opts = SolverOptions {
            dx_max: 1.0,
            ..Default::default()
        };
        let sim = simulate_detailed(&net, &theta(), &InletFlow::constant(q0, 0.5), &opts).map_err(|e| e.to_string())?;
        let p_in = sim.traces.pressure_in(0);
        let p_out = sim.traces.pressure_out(0);
        let n = p_in.len();
        let drop = p_in[n - 1] - p_out[n - 1];
        let area = PI * r * r;
        let exact = 2.0 * PI * mu * (gamma + 2.0) * q0 * l / (area * area);
        let err = (drop - exact).abs() / exact;
        ok &= sim.output.converged && err < 0.05;
        lines.push(format!("gamma={gamma}: {drop:.3} vs {exact:.3} (err {:.2}%)", 100.0 * err));
    }
    let detail = lines.join(", ");
    if !ok {
        return Err(detail);
    }
    within(t0.elapsed(), 60.0, detail)
}

fn mass_conservation() -> Check {
    let t0 = Instant::now();
    let cfg = desk_config(&std::env::temp_dir().join("pulmocal-unused"))?;
    let net = pulmocal_cli::stages::load_network(&cfg).map_err(|e| e.to_string())?;
    let inlet = pulmocal_cli::stages::load_inlet(&cfg, &net).map_err(|e| e.to_string())?;
    let sim = simulate_detailed(&net, &theta(), &inlet, &cfg.solver).map_err(|e| e.to_string())?;
    let imbalance = sim.traces.mass_imbalance(&net);
    let detail = format!(
        "converged={} after {} cycles, relative imbalance {imbalance:.2e}",
        sim.output.converged, sim.output.cycles_run
    );
    if !(sim.output.converged && imbalance < 1e-3) {
        return Err(detail);
    }
    within(t0.elapsed(), 120.0, detail)
}

/// Z(0) from Poiseuille resistances and parallel combination only.
fn poiseuille_oracle(spec: &StructuredTreeSpec, r: f64, alpha: f64, beta: f64) -> f64 {
    if r < spec.r_min {
        return 0.0;
    }
    let own = 8.0 * spec.fluid.viscosity * spec.lrr * r / (PI * r.powi(4));
    let a = poiseuille_oracle(spec, alpha * r, alpha, beta);
    let b = poiseuille_oracle(spec, beta * r, alpha, beta);
    let load = if a + b == 0.0 { 0.0 } else { a * b / (a + b) };
    own + load
}

fn tree_spec(eta: f64, lrr: f64, r_term: f64) -> StructuredTreeSpec {
    StructuredTreeSpec {
        eta,
        zeta: 0.6,
        lrr,
        r_min: 0.005,
        r_term,
        stiffness: 170.0 * MMHG_TO_CGS,
        fluid: FluidConstants::default(),
        period: 0.9,
    }
}

fn zero_frequency_oracle() -> Check {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let eta = rng.random_range(DEFAULT_BOUNDS[0].lo..DEFAULT_BOUNDS[0].hi);
        let lrr = rng.random_range(DEFAULT_BOUNDS[1].lo..DEFAULT_BOUNDS[1].hi);
        // Small roots keep the exponential oracle cheap.
        let r_term = rng.random_range(0.02..0.06);
        let spec = tree_spec(eta, lrr, r_term);
        let z = root_impedance_spectrum(&spec, 1).map_err(|e| e.to_string())?;
        let pair = alpha_beta(eta, 0.6).map_err(|e| e.to_string())?;
        let oracle = poiseuille_oracle(&spec, r_term, pair.alpha, pair.beta);
        let z0 = z.values[0];
        worst = worst.max((z0.re - oracle).abs() / oracle).max(z0.im.abs() / oracle);
    }
    let detail = format!("20 random trees, worst relative error {worst:.2e}");
    if worst >= 1e-8 {
        return Err(detail);
    }
    within(t0.elapsed(), 60.0, detail)
}

fn murray_consistency() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let eta = rng.random_range(1.5..3.0);
        let zeta = rng.random_range(0.05..=1.0);
        let r_term = rng.random_range(0.01..1.0);
        let pair = alpha_beta(eta, zeta).map_err(|e| e.to_string())?;
        worst = worst.max((pair.beta - pair.alpha * zeta.sqrt()).abs() / pair.beta);
        for g in 0..8 {
            for h in 0..8 {
                let p = vessel_radius(r_term, pair, g, h);
                let d1 = vessel_radius(r_term, pair, g + 1, h);
                let d2 = vessel_radius(r_term, pair, g, h + 1);
                let lhs = p.powf(eta);
                worst = worst.max((lhs - d1.powf(eta) - d2.powf(eta)).abs() / lhs);
            }
        }
    }
    ensure(worst < 1e-12, format!("100 specs x 64 bifurcations, worst relative residual {worst:.2e}"))
}

fn batch_mean_se(x: &[f64], batches: usize) -> f64 {
    let b = x.len() / batches;
    let means: Vec<f64> = (0..batches).map(|i| x[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

fn mcmc_correctness() -> Check {
    let t0 = Instant::now();
    let mu = [1.0, -2.0];
    let (s1, s2, rho) = (2.0f64, 0.5f64, 0.6f64);
    let det = 1.0 - rho * rho;
    let mut target = |x: &[f64]| {
        let (u, v) = ((x[0] - mu[0]) / s1, (x[1] - mu[1]) / s2);
        -0.5 * (u * u - 2.0 * rho * u * v + v * v) / det
    };
    let opts = DramOptions {
        iterations: 12_000,
        burn_in: 2_000,
        seed: 21,
        ..Default::default()
    };
    let chain = dram_sample(&mut target, &[0.0, 0.0], &[12.0, 3.0], &opts).map_err(|e| e.to_string())?;
    let xs = [chain.series(0), chain.series(1)];
    let n = xs[0].len() as f64;
    let means: Vec<f64> = xs.iter().map(|s| s.iter().sum::<f64>() / n).collect();
    let cov = |a: usize, b: usize| {
        xs[a].iter().zip(&xs[b]).map(|(x, y)| (x - means[a]) * (y - means[b])).sum::<f64>() / (n - 1.0)
    };
    let true_cov = [[s1 * s1, rho * s1 * s2], [rho * s1 * s2, s2 * s2]];
    let mut ok = true;
    let mut parts = vec![format!("{} draws", xs[0].len())];
    for k in 0..2 {
        let se = batch_mean_se(&xs[k], 40);
        let z = (means[k] - mu[k]).abs() / se;
        ok &= z < 3.0;
        parts.push(format!("mean[{k}] {:.3} ({z:.2} SE)", means[k]));
    }
    for (a, b) in [(0, 0), (1, 1), (0, 1)] {
        // Off-diagonal error is measured against the product of the sds.
        let scale = (true_cov[a][a] * true_cov[b][b]).sqrt();
        let err = (cov(a, b) - true_cov[a][b]).abs() / scale;
        ok &= err < 0.1;
        parts.push(format!("cov[{a}{b}] err {:.1}%", 100.0 * err));
    }

    let mut target1 = |x: &[f64]| -0.5 * x[0] * x[0];
    let opts1 = DramOptions {
        iterations: 30_000,
        burn_in: 2_000,
        seed: 5,
        ..Default::default()
    };
    let c1 = dram_sample(&mut target1, &[0.5], &[6.0], &opts1).map_err(|e| e.to_string())?;
    let thinned: Vec<f64> = c1.series(0).into_iter().step_by(10).collect();
    let normal = statrs::distribution::Normal::standard();
    let ks = pulmocal::analysis::ks_test_cdf(&thinned, |x| statrs::distribution::ContinuousCDF::cdf(&normal, x))
        .map_err(|e| e.to_string())?;
    ok &= ks.p > 0.01;
    parts.push(format!("1D KS p={:.3}", ks.p));
    let detail = parts.join(", ");
    if !ok {
        return Err(detail);
    }
    within(t0.elapsed(), 60.0, detail)
}

fn geweke_calibration() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut rejections = 0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..2000).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        if geweke_test(&x).map_err(|e| e.to_string())?.p < 0.05 {
            rejections += 1;
        }
    }
    let ramp: Vec<f64> = (0..2000)
        .map(|i| i as f64 / 2000.0 + 0.1 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    let ramp_p = geweke_test(&ramp).map_err(|e| e.to_string())?.p;
    ensure(
        rejections <= 10 && ramp_p < 0.05,
        format!("{rejections}/100 iid chains rejected, ramp p={ramp_p:.2e}"),
    )
}

fn likelihood_bookkeeping() -> Check {
    let obs = read_observations(&desk_dir().join("observations.csv")).map_err(|e| e.to_string())?;
    let y = obs.data.to_vector();
    let diag = NoiseModel::default_for(&obs.data).diagonal();
    let sizes: Vec<usize> = (0..SOURCE_SIZES.len()).map(|s| source_range(s).len()).collect();
    let blocks_constant = (0..SOURCE_SIZES.len()).all(|s| {
        let r = source_range(s);
        diag[r.clone()].iter().all(|&v| v == diag[r.start])
    });
    ensure(
        y.len() == 107 && LIKELIHOOD_LEN == 107 && diag.len() == 107 && sizes == [2, 35, 35, 35] && blocks_constant,
        format!("vector length {}, block sizes {sizes:?}", y.len()),
    )
}

fn desk_config(artifacts: &Path) -> Result<RunConfig, String> {
    let desk = desk_dir();
    let mut cfg: RunConfig = serde_json::from_str(&fs::read_to_string(desk.join("config.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    cfg.resolve(&desk);
    cfg.paths.artifacts = artifacts.to_path_buf();
    Ok(cfg)
}

/// Results of the desk twin run, shared by several criteria.
struct TwinRun {
    emulator: EmulatorReport,
    rows: Vec<Vec<f64>>,
    summary: CalibrationReport,
    propagation: PropagationReport,
    report: AnalysisReport,
    elapsed: Duration,
}

fn twin_run() -> Result<TwinRun, String> {
    let t0 = Instant::now();
    let work = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-twin");
    if std::env::var_os("PULMOCAL_ACCEPTANCE_FRESH").is_some() && work.exists() {
        fs::remove_dir_all(&work).map_err(|e| e.to_string())?;
    }
    fs::create_dir_all(&work).map_err(|e| e.to_string())?;
    let artifacts = work.join("artifacts");
    let mut cfg = desk_config(&artifacts)?;

    // Synthetic data from the solver at θ*, 2% of each source's range as noise.
    let obs_path = work.join("observations.csv");
    let spec = SyntheticSpec {
        path: obs_path.clone(),
        noise_fraction: 0.02,
        seed: 5,
    };
    simulate_single(&cfg, &THETA_STAR, None, Some(&spec)).map_err(|e| format!("{e:#}"))?;
    cfg.paths.observations = Some(obs_path);
    cfg.validate().map_err(|e| format!("{e:#}"))?;

    let mut pipeline = Pipeline::new(cfg, false).map_err(|e| format!("{e:#}"))?;
    let statuses = pipeline.run(&Stage::ALL).map_err(|e| format!("{e:#}"))?;
    for (stage, status) in &statuses {
        println!("  twin {}: {status:?}", stage.name());
    }
    // A fully cached run reports the time of the run that built the artifacts.
    let timing = work.join("elapsed_s");
    let elapsed = if statuses.iter().any(|(_, s)| *s == Freshness::Stale) {
        let e = t0.elapsed();
        fs::write(&timing, e.as_secs_f64().to_string()).map_err(|e| e.to_string())?;
        e
    } else {
        let text = fs::read_to_string(&timing).map_err(|e| format!("cached twin without timing: {e}"))?;
        Duration::from_secs_f64(text.trim().parse::<f64>().map_err(|e| e.to_string())?)
    };
    let rd = |rel: &str| artifacts.join(rel);
    let (_, emulator): (Meta, EmulatorReport) = read_json(&rd(EMULATOR_REPORT_FILE)).map_err(|e| e.to_string())?;
    let (_, summary): (Meta, CalibrationReport) =
        read_json(&rd(&summary_file(PriorFamily::Gaussian))).map_err(|e| e.to_string())?;
    let (_, propagation): (Meta, PropagationReport) = read_json(&rd(PROPAGATION_FILE)).map_err(|e| e.to_string())?;
    let (_, report): (Meta, AnalysisReport) = read_json(&rd(REPORT_FILE)).map_err(|e| e.to_string())?;
    let sims = read_simulations_csv(&rd(SIMULATIONS_FILE)).map_err(|e| e.to_string())?;
    let rows = sims.into_iter().filter(|r| r.usable(false)).map(|r| r.values).collect();
    Ok(TwinRun {
        emulator,
        rows,
        summary,
        propagation,
        report,
        elapsed,
    })
}

fn pca_contract(run: &TwinRun) -> Check {
    let e = &run.emulator;
    let full = fit_pca(&run.rows, 1.0, None).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for y in &run.rows {
        let back = full.reconstruct(&full.scores(y));
        let num: f64 = y.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = y.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(num / den);
    }
    ensure(
        e.explained_variance >= 0.999 && worst < 1e-10,
        format!(
            "{} of {} rows, {} components explain {:.5}, full-rank reconstruction error {worst:.2e}",
            run.rows.len(),
            e.n_rows,
            e.n_components,
            e.explained_variance
        ),
    )
}

fn emulator_accuracy(run: &TwinRun) -> Check {
    let e = &run.emulator;
    let parts: Vec<String> = SIGNALS
        .iter()
        .zip(&e.relative_rmse)
        .map(|(s, r)| format!("{s} {:.2}%", 100.0 * r))
        .collect();
    ensure(
        e.n_test > 0 && e.relative_rmse.len() == 4 && e.relative_rmse.iter().all(|&r| r < 0.05),
        format!("{} held out of {}: {}", e.n_test, e.n_train + e.n_test, parts.join(", ")),
    )
}

fn twin_recovery(run: &TwinRun) -> Check {
    let params = &run.summary.summary.parameters;
    let covered = params
        .iter()
        .zip(THETA_STAR)
        .filter(|(p, t)| p.marginal.ci_lower <= *t && *t <= p.marginal.ci_upper)
        .count();
    let eta_err = [0, 2].map(|k| (params[k].marginal.mean - THETA_STAR[k]).abs() / THETA_STAR[k]);
    let geweke_min = params.iter().map(|p| p.geweke_p).fold(f64::INFINITY, f64::min);
    let cover = run.propagation.prediction_coverage;
    let means: Vec<String> = params.iter().map(|p| format!("{:.3}", p.marginal.mean)).collect();
    let detail = format!(
        "means [{}], CI covers {covered}/4, eta errors {:.1}%/{:.1}%, min Geweke p {geweke_min:.3}, \
         prediction coverage {:.1}%; {:.0} s",
        means.join(", "),
        100.0 * eta_err[0],
        100.0 * eta_err[1],
        100.0 * cover,
        run.elapsed.as_secs_f64()
    );
    ensure(
        covered >= 3
            && eta_err.iter().all(|&e| e < 0.1)
            && geweke_min > 0.05
            && cover >= 0.9
            && run.elapsed.as_secs_f64() < 5400.0,
        detail,
    )
}

fn prior_sensitivity(run: &TwinRun) -> Check {
    let r = &run.report;
    let families: Vec<PriorFamily> = r.posteriors.iter().map(|(p, _)| *p).collect();
    let both = families.contains(&PriorFamily::Gaussian) && families.contains(&PriorFamily::Uniform);
    let cmp = r.prior_comparisons.first();
    let ks: Vec<String> = cmp
        .map(|c| c.parameters.iter().map(|p| format!("{} p={:.3}", p.parameter, p.ks.p)).collect())
        .unwrap_or_default();
    ensure(
        both && cmp.is_some_and(|c| c.parameters.len() == 4 && c.parameters.iter().all(|p| p.ks.p.is_finite())),
        format!("KS gaussian vs uniform: {}", ks.join(", ")),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |id: u32, name: &str, result: Check| {
        match &result {
            Ok(d) => println!("PASS  {id:>2}. {name}: {d}"),
            Err(d) => {
                failures += 1;
                println!("FAIL  {id:>2}. {name}: {d}");
            }
        }
    };
    report(1, "steady viscous drop", steady_viscous_drop());
    report(2, "mass conservation", mass_conservation());
    report(3, "structured tree zero-frequency oracle", zero_frequency_oracle());
    report(4, "bifurcation radius consistency", murray_consistency());
    report(7, "MCMC correctness", mcmc_correctness());
    report(8, "Geweke calibration", geweke_calibration());
    report(10, "likelihood bookkeeping", likelihood_bookkeeping());
    match twin_run() {
        Ok(run) => {
            report(5, "PCA contract", pca_contract(&run));
            report(6, "emulator accuracy", emulator_accuracy(&run));
            report(9, "synthetic-twin recovery", twin_recovery(&run));
            report(11, "prior-sensitivity rerun", prior_sensitivity(&run));
        }
        Err(e) => {
            for (id, name) in [
                (5, "PCA contract"),
                (6, "emulator accuracy"),
                (9, "synthetic-twin recovery"),
                (11, "prior-sensitivity rerun"),
            ] {
                report(id, name, Err(format!("desk pipeline failed: {e}")));
            }
        }
    }
    if failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
