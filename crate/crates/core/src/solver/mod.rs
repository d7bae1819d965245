//! 1D pulse-wave solver on the large-vessel network.
//!
//! Each vessel carries the conservation form of the area/flow equations with a
//! power-law velocity profile and the linear wall law. The interior advances
//! with the two-step (Richtmyer) Lax–Wendroff scheme; vessel ends are closed by
//! extrapolating the outgoing Riemann invariant along its characteristic and
//! solving the remaining boundary relation with Newton iteration:
//!
//! - inlet: prescribed flow
//! - junctions: flow conservation and pressure continuity
//! - outlets: pressure equal to the periodic convolution of the structured-tree
//!   kernel with the outlet flow
//!
//! Cycles are repeated until the observed pressure is periodic, and the final
//! cycle is sampled onto the observation grid.

mod boundary;
mod inflow;
mod observables;
mod outlet;
mod wall;

pub use inflow::{InletFlow, PeriodicSpline};
pub use observables::{
    extract_observables, likelihood_vector_from_model, Observables, LIKELIHOOD_LEN, MODEL_LEN, N_SAMPLES,
};
pub use wall::{wall_pressure, Wall};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ArterialNetwork, Side};
use crate::params::ParameterVector;
use crate::tree::{impedance_kernel_time, root_impedance_spectrum, ImpedanceKernel, StructuredTreeSpec};
use crate::units::cgs_to_mmhg;
use boundary::{solve_inlet, solve_junction, solve_outlet, Characteristic};
use outlet::OutletLoad;

/// Training rows above this systolic pressure (mmHg) are tagged non-physiological.
pub const PHYSIOLOGICAL_PRESSURE_LIMIT: f64 = 120.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Time steps per cardiac period; rounded up to a power of two.
    pub steps_per_period: usize,
    /// Step-count ceiling when the CFL limit forces refinement.
    pub max_steps_per_period: usize,
    /// Target Courant number used to pick the initial step count.
    pub cfl: f64,
    pub min_cells: usize,
    /// Largest cell size (cm).
    pub dx_max: f64,
    pub max_cycles: usize,
    /// Relative L2 change of the observed pressure between cycles.
    pub tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            steps_per_period: 1 << 13,
            max_steps_per_period: 1 << 16,
            cfl: 0.5,
            min_cells: 8,
            dx_max: 0.1,
            max_cycles: 30,
            tolerance: 1e-3,
        }
    }
}

/// Four signals sampled at 35 equispaced times over the final cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    /// mmHg
    pub mpa_pressure: Vec<f64>,
    /// mL/s
    pub lpa_flow: Vec<f64>,
    /// mL/s
    pub rpa_flow: Vec<f64>,
    /// cm²
    pub mpa_area: Vec<f64>,
    pub converged: bool,
    pub cycles_run: usize,
    pub steps_per_period: usize,
}

impl SimulationOutput {
    /// [pressure, lpa flow, rpa flow, area], 140 entries.
    pub fn model_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(MODEL_LEN);
        v.extend_from_slice(&self.mpa_pressure);
        v.extend_from_slice(&self.lpa_flow);
        v.extend_from_slice(&self.rpa_flow);
        v.extend_from_slice(&self.mpa_area);
        v
    }

    pub fn from_model_vector(v: &[f64], converged: bool) -> Result<Self> {
        if v.len() != MODEL_LEN {
            return Err(Error::InvalidInput(format!("model vector needs {MODEL_LEN} entries, got {}", v.len())));
        }
        let n = N_SAMPLES;
        Ok(Self {
            mpa_pressure: v[..n].to_vec(),
            lpa_flow: v[n..2 * n].to_vec(),
            rpa_flow: v[2 * n..3 * n].to_vec(),
            mpa_area: v[3 * n..].to_vec(),
            converged,
            cycles_run: 0,
            steps_per_period: 0,
        })
    }

    /// Converged and below the pressure ceiling.
    pub fn is_physiological(&self) -> bool {
        self.converged && self.mpa_pressure.iter().all(|&p| p <= PHYSIOLOGICAL_PRESSURE_LIMIT)
    }

    pub fn sample_times(&self, period: f64) -> Vec<f64> {
        (0..self.mpa_pressure.len())
            .map(|i| period * i as f64 / self.mpa_pressure.len() as f64)
            .collect()
    }
}

/// Boundary and midpoint histories of one vessel over the final cycle (CGS).
#[derive(Debug, Clone, Default)]
pub struct VesselTrace {
    pub a_in: Vec<f64>,
    pub q_in: Vec<f64>,
    pub a_mid: Vec<f64>,
    pub q_mid: Vec<f64>,
    pub a_out: Vec<f64>,
    pub q_out: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CycleTraces {
    pub dt: f64,
    pub vessels: Vec<VesselTrace>,
    pub walls: Vec<Wall>,
}

impl CycleTraces {
    fn new(n_vessels: usize, walls: Vec<Wall>, n: usize, dt: f64) -> Self {
        let blank = VesselTrace {
            a_in: vec![0.0; n],
            q_in: vec![0.0; n],
            a_mid: vec![0.0; n],
            q_mid: vec![0.0; n],
            a_out: vec![0.0; n],
            q_out: vec![0.0; n],
        };
        Self {
            dt,
            vessels: vec![blank; n_vessels],
            walls,
        }
    }

    pub fn pressure_in(&self, v: usize) -> Vec<f64> {
        self.vessels[v].a_in.iter().map(|&a| self.walls[v].pressure(a)).collect()
    }

    pub fn pressure_mid(&self, v: usize) -> Vec<f64> {
        self.vessels[v].a_mid.iter().map(|&a| self.walls[v].pressure(a)).collect()
    }

    pub fn pressure_out(&self, v: usize) -> Vec<f64> {
        self.vessels[v].a_out.iter().map(|&a| self.walls[v].pressure(a)).collect()
    }

    /// Cycle-integrated volume through a series (mL).
    pub fn integrate(&self, series: &[f64]) -> f64 {
        series.iter().sum::<f64>() * self.dt
    }

    /// |∫q_in − Σ∫q_out| / ∫q_in over the cycle.
    pub fn mass_imbalance(&self, net: &ArterialNetwork) -> f64 {
        let q_in = self.integrate(&self.vessels[net.inlet].q_in);
        let q_out: f64 = net.outlets.iter().map(|&o| self.integrate(&self.vessels[o].q_out)).sum();
        (q_in - q_out).abs() / q_in.abs()
    }
}

#[derive(Debug, Clone)]
pub struct DetailedSimulation {
    pub output: SimulationOutput,
    pub traces: CycleTraces,
    /// Root resistance Z(0) of each outlet's tree (g/(cm⁴·s)), in outlet order.
    pub outlet_resistance: Vec<f64>,
}

/// Runs the network to a periodic state and samples the observables.
pub fn simulate(
    net: &ArterialNetwork,
    theta: &ParameterVector,
    inlet: &InletFlow,
    opts: &SolverOptions,
) -> Result<SimulationOutput> {
    simulate_detailed(net, theta, inlet, opts).map(|d| d.output)
}

pub fn simulate_detailed(
    net: &ArterialNetwork,
    theta: &ParameterVector,
    inlet: &InletFlow,
    opts: &SolverOptions,
) -> Result<DetailedSimulation> {
    if !theta.is_finite() {
        return Err(Error::InvalidInput("parameters must be finite".into()));
    }
    if (inlet.period - net.period).abs() > 1e-9 * net.period {
        return Err(Error::InvalidInput(format!(
            "inlet period {} does not match network period {}",
            inlet.period, net.period
        )));
    }
    if let Some(&o) = net.outlets.iter().find(|&&o| net.vessels[o].side == Side::Trunk) {
        return Err(Error::Network(format!(
            "outlet '{}' has no lung side; every outlet must be left or right",
            net.vessels[o].id
        )));
    }
    if opts.min_cells < 2 || !(opts.dx_max > 0.0) || !(opts.cfl > 0.0 && opts.cfl < 1.0) {
        return Err(Error::InvalidInput("solver options out of range".into()));
    }
    let spline = inlet.spline()?;
    let trees = outlet_trees(net, theta)?;
    let sites = ObservationSites::resolve(net);

    let mut n_steps = opts.steps_per_period.max(16).next_power_of_two();
    let mut kernels: Vec<(usize, ImpedanceKernel, f64)> = Vec::new();
    loop {
        let mut grid = NetworkGrid::new(net, opts);
        let initial = grid.initial_state(net, &trees, &spline)?;
        let needed = grid.required_steps(net.period, opts.cfl);
        if needed > n_steps {
            n_steps = needed.next_power_of_two();
        }
        if n_steps > opts.max_steps_per_period {
            return Err(Error::Unstable(format!(
                "CFL condition needs {n_steps} steps per period, above the floor of {}",
                opts.max_steps_per_period
            )));
        }
        if kernels.first().map(|k| k.1.values.len()) != Some(n_steps) {
            kernels = build_kernels(&trees, n_steps)?;
        }
        match run_cycles(net, &mut grid, &kernels, &initial, &spline, &sites, n_steps, opts)? {
            CycleRun::Done(mut d) => {
                d.outlet_resistance = kernels.iter().map(|k| k.2).collect();
                return Ok(d);
            }
            CycleRun::Refine => {
                n_steps *= 2;
                if n_steps > opts.max_steps_per_period {
                    return Err(Error::Unstable(format!(
                        "Courant number above 1 at the step-size floor ({} steps per period)",
                        opts.max_steps_per_period
                    )));
                }
            }
        }
    }
}

/// Tree specification for every outlet, in `net.outlets` order.
pub fn outlet_trees(net: &ArterialNetwork, theta: &ParameterVector) -> Result<Vec<StructuredTreeSpec>> {
    net.outlets
        .iter()
        .map(|&o| {
            let v = &net.vessels[o];
            let (eta, lrr) = match v.side {
                Side::Left => (theta.eta_l, theta.lrr_l),
                Side::Right => (theta.eta_r, theta.lrr_r),
                Side::Trunk => unreachable!("trunk outlets rejected above"),
            };
            let spec = StructuredTreeSpec {
                eta,
                zeta: net.area_ratio,
                lrr,
                r_min: net.r_min,
                r_term: v.radius_dia,
                stiffness: net.wall.stiffness(),
                fluid: net.fluid,
                period: net.period,
            };
            spec.validate()?;
            Ok(spec)
        })
        .collect()
}

/// Kernels per outlet with their zero-frequency resistance; identical trees
/// share one computation.
fn build_kernels(trees: &[StructuredTreeSpec], n_steps: usize) -> Result<Vec<(usize, ImpedanceKernel, f64)>> {
    let mut out: Vec<(usize, ImpedanceKernel, f64)> = Vec::with_capacity(trees.len());
    for (i, spec) in trees.iter().enumerate() {
        if let Some(j) = trees[..i].iter().position(|s| s == spec) {
            let shared = out[j].clone();
            out.push((i, shared.1, shared.2));
            continue;
        }
        let spectrum = root_impedance_spectrum(spec, n_steps / 2)?;
        let kernel = impedance_kernel_time(&spectrum, n_steps)?;
        out.push((i, kernel, spectrum.resistance()));
    }
    Ok(out)
}

/// Vessels whose midpoints supply the four observed signals.
#[derive(Debug, Clone, Copy)]
struct ObservationSites {
    trunk: usize,
    left: Option<usize>,
    right: Option<usize>,
}

impl ObservationSites {
    /// Pressure and area at the inlet vessel; each lung's flow in its most
    /// proximal vessel.
    fn resolve(net: &ArterialNetwork) -> Self {
        let mut order = vec![net.inlet];
        let mut i = 0;
        while i < order.len() {
            order.extend(net.vessels[order[i]].children.iter().copied());
            i += 1;
        }
        let first = |side| order.iter().copied().find(|&v| net.vessels[v].side == side);
        Self {
            trunk: net.inlet,
            left: first(Side::Left),
            right: first(Side::Right),
        }
    }
}

struct VesselGrid {
    wall: Wall,
    cells: usize,
    dx: f64,
    a: Vec<f64>,
    q: Vec<f64>,
    a_next: Vec<f64>,
    q_next: Vec<f64>,
    a_half: Vec<f64>,
    q_half: Vec<f64>,
}

struct NetworkGrid {
    vessels: Vec<VesselGrid>,
    chi: f64,
    friction: f64,
}

struct InitialState {
    outlet_flow: Vec<f64>,
}

impl NetworkGrid {
    fn new(net: &ArterialNetwork, opts: &SolverOptions) -> Self {
        let vessels = net
            .vessels
            .iter()
            .map(|v| {
                let cells = opts.min_cells.max((v.length / opts.dx_max).ceil() as usize);
                let wall = Wall {
                    a_dia: v.area_dia(),
                    stiffness: net.wall.stiffness(),
                    p_dia: net.wall.p_dia(),
                    density: net.fluid.density,
                };
                let n = cells + 1;
                VesselGrid {
                    wall,
                    cells,
                    dx: v.length / cells as f64,
                    a: vec![wall.a_dia; n],
                    q: vec![0.0; n],
                    a_next: vec![0.0; n],
                    q_next: vec![0.0; n],
                    a_half: vec![0.0; cells],
                    q_half: vec![0.0; cells],
                }
            })
            .collect();
        Self {
            vessels,
            chi: net.fluid.momentum_correction(),
            friction: net.fluid.friction_coefficient(),
        }
    }

    /// Uniform pressure equal to the mean inflow through the parallel tree
    /// resistances, with mean flow split by each tree's share.
    fn initial_state(
        &mut self,
        net: &ArterialNetwork,
        trees: &[StructuredTreeSpec],
        spline: &PeriodicSpline,
    ) -> Result<InitialState> {
        let resistances: Vec<f64> = trees
            .iter()
            .map(|s| root_impedance_spectrum(s, 1).map(|z| z.resistance()))
            .collect::<Result<_>>()?;
        let conductance: f64 = resistances.iter().map(|r| 1.0 / r).sum();
        let q_mean = spline.mean();
        let pressure = q_mean / conductance;
        let outlet_flow: Vec<f64> = resistances.iter().map(|r| pressure / r).collect();

        let mut vessel_flow = vec![0.0; net.vessels.len()];
        for (k, &o) in net.outlets.iter().enumerate() {
            let mut v = Some(o);
            while let Some(i) = v {
                vessel_flow[i] += outlet_flow[k];
                v = net.vessels[i].parent;
            }
        }
        for (g, &q) in self.vessels.iter_mut().zip(&vessel_flow) {
            let a = g.wall.area(pressure);
            if !(a > 0.0) {
                return Err(Error::Collapse {
                    vessel: "initial state".into(),
                    time: 0.0,
                });
            }
            g.a.iter_mut().for_each(|x| *x = a);
            g.q.iter_mut().for_each(|x| *x = q);
        }
        Ok(InitialState { outlet_flow })
    }

    fn max_speed_over_dx(&self) -> f64 {
        let chi = self.chi;
        self.vessels
            .iter()
            .map(|g| {
                g.a.iter()
                    .zip(&g.q)
                    .map(|(&a, &q)| {
                        let u = q / a;
                        let c = g.wall.wave_speed(a);
                        (chi * u).abs() + (c * c + chi * (chi - 1.0) * u * u).sqrt()
                    })
                    .fold(0.0, f64::max)
                    / g.dx
            })
            .fold(0.0, f64::max)
    }

    fn required_steps(&self, period: f64, cfl: f64) -> usize {
        (period * self.max_speed_over_dx() / cfl).ceil() as usize
    }

    fn source(&self, a: f64, q: f64) -> f64 {
        -self.friction * q / a
    }

    /// Lax–Wendroff update of interior nodes into the `*_next` buffers.
    fn advance_interior(&mut self, dt: f64) {
        let (chi, friction) = (self.chi, self.friction);
        let flux = |w: &Wall, a: f64, q: f64| chi * q * q / a + w.flux_pressure(a);
        let source = |a: f64, q: f64| -friction * q / a;
        for g in &mut self.vessels {
            let w = g.wall;
            let r = dt / g.dx;
            for j in 0..g.cells {
                let (a0, q0, a1, q1) = (g.a[j], g.q[j], g.a[j + 1], g.q[j + 1]);
                g.a_half[j] = 0.5 * (a0 + a1) - 0.5 * r * (q1 - q0);
                g.q_half[j] = 0.5 * (q0 + q1) - 0.5 * r * (flux(&w, a1, q1) - flux(&w, a0, q0))
                    + 0.25 * dt * (source(a0, q0) + source(a1, q1));
            }
            for j in 1..g.cells {
                let (al, ql, ar, qr) = (g.a_half[j - 1], g.q_half[j - 1], g.a_half[j], g.q_half[j]);
                g.a_next[j] = g.a[j] - r * (qr - ql);
                g.q_next[j] = g.q[j] - r * (flux(&w, ar, qr) - flux(&w, al, ql))
                    + 0.5 * dt * (source(al, ql) + source(ar, qr));
            }
        }
    }

    /// Outgoing invariant at the distal end (forward characteristic).
    fn outgoing_distal(&self, v: usize, dt: f64) -> Characteristic {
        let g = &self.vessels[v];
        let m = g.cells;
        self.outgoing(g, m, m - 1, dt, 1.0)
    }

    /// Outgoing invariant at the proximal end (backward characteristic).
    fn outgoing_proximal(&self, v: usize, dt: f64) -> Characteristic {
        let g = &self.vessels[v];
        self.outgoing(g, 0, 1, dt, -1.0)
    }

    fn outgoing(&self, g: &VesselGrid, end: usize, inner: usize, dt: f64, sign: f64) -> Characteristic {
        let chi = self.chi;
        let (a, q) = (g.a[end], g.q[end]);
        let u = q / a;
        let c = g.wall.wave_speed(a);
        let lambda = chi * u + sign * (c * c + chi * (chi - 1.0) * u * u).sqrt();
        let s = (lambda.abs() * dt / g.dx).min(1.0);
        let af = a + s * (g.a[inner] - a);
        let qf = q + s * (g.q[inner] - q);
        let uf = qf / af;
        let invariant = uf + sign * 4.0 * g.wall.wave_speed(af) + dt * self.source(af, qf) / af;
        Characteristic {
            invariant,
            sign,
            wall: g.wall,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        net: &ArterialNetwork,
        loads: &mut [OutletLoad],
        q_inlet: f64,
        dt: f64,
        time: f64,
    ) -> Result<()> {
        // Boundary invariants come from the old state, before interior update.
        let distal: Vec<Characteristic> = (0..self.vessels.len()).map(|v| self.outgoing_distal(v, dt)).collect();
        let proximal: Vec<Characteristic> =
            (0..self.vessels.len()).map(|v| self.outgoing_proximal(v, dt)).collect();
        self.advance_interior(dt);

        let inlet = net.inlet;
        let a0 = solve_inlet(&proximal[inlet], q_inlet, self.vessels[inlet].a[0])?;
        self.vessels[inlet].a_next[0] = a0;
        self.vessels[inlet].q_next[0] = q_inlet;

        for (v, vessel) in net.vessels.iter().enumerate() {
            if vessel.children.is_empty() {
                continue;
            }
            let m = self.vessels[v].cells;
            let guess: Vec<f64> = std::iter::once(self.vessels[v].a[m])
                .chain(vessel.children.iter().map(|&c| self.vessels[c].a[0]))
                .collect();
            let daughters: Vec<Characteristic> = vessel.children.iter().map(|&c| proximal[c]).collect();
            let sol = solve_junction(&distal[v], &daughters, &guess)?;
            self.vessels[v].a_next[m] = sol.areas[0];
            self.vessels[v].q_next[m] = sol.flows[0];
            for (k, &c) in vessel.children.iter().enumerate() {
                self.vessels[c].a_next[0] = sol.areas[k + 1];
                self.vessels[c].q_next[0] = sol.flows[k + 1];
            }
        }

        for (k, &o) in net.outlets.iter().enumerate() {
            let m = self.vessels[o].cells;
            let load = &loads[k];
            let (a, q) = solve_outlet(&distal[o], load.r0(), load.history_pressure(), self.vessels[o].a[m])?;
            self.vessels[o].a_next[m] = a;
            self.vessels[o].q_next[m] = q;
        }

        for (v, g) in self.vessels.iter_mut().enumerate() {
            if g.a_next.iter().any(|&a| !(a > 0.0)) {
                if g.a_next.iter().any(|a| a.is_nan()) {
                    return Err(Error::Unstable(format!("non-finite state in vessel {v} at t = {time}")));
                }
                return Err(Error::Collapse {
                    vessel: net.vessels[v].id.clone(),
                    time,
                });
            }
            std::mem::swap(&mut g.a, &mut g.a_next);
            std::mem::swap(&mut g.q, &mut g.q_next);
        }
        Ok(())
    }

    fn record(&self, traces: &mut CycleTraces, n: usize) {
        for (g, t) in self.vessels.iter().zip(traces.vessels.iter_mut()) {
            let mid = g.cells / 2;
            t.a_in[n] = g.a[0];
            t.q_in[n] = g.q[0];
            t.a_mid[n] = g.a[mid];
            t.q_mid[n] = g.q[mid];
            t.a_out[n] = g.a[g.cells];
            t.q_out[n] = g.q[g.cells];
        }
    }
}

enum CycleRun {
    Done(DetailedSimulation),
    Refine,
}

#[allow(clippy::too_many_arguments)]
fn run_cycles(
    net: &ArterialNetwork,
    grid: &mut NetworkGrid,
    kernels: &[(usize, ImpedanceKernel, f64)],
    initial: &InitialState,
    spline: &PeriodicSpline,
    sites: &ObservationSites,
    n_steps: usize,
    opts: &SolverOptions,
) -> Result<CycleRun> {
    let dt = net.period / n_steps as f64;
    let mut loads: Vec<OutletLoad> = kernels
        .iter()
        .zip(&initial.outlet_flow)
        .map(|((_, k, _), &q)| OutletLoad::new(k, q))
        .collect();
    for (k, &o) in net.outlets.iter().enumerate() {
        let g = &grid.vessels[o];
        loads[k].push(g.q[g.cells]);
    }

    let walls: Vec<Wall> = grid.vessels.iter().map(|g| g.wall).collect();
    let mut traces = CycleTraces::new(net.vessels.len(), walls, n_steps, dt);
    grid.record(&mut traces, 0);
    let mut previous: Option<Vec<f64>> = None;
    let mut converged = false;
    let mut cycles = 0;

    let mut m = 0usize;
    loop {
        m += 1;
        let time = m as f64 * dt;
        if grid.max_speed_over_dx() * dt > 0.95 {
            return Ok(CycleRun::Refine);
        }
        grid.step(net, &mut loads, spline.eval(time), dt, time)?;
        for (k, &o) in net.outlets.iter().enumerate() {
            let g = &grid.vessels[o];
            loads[k].push(g.q[g.cells]);
        }
        let n = m % n_steps;
        if n == 0 {
            // Cycle complete; the new state opens the next cycle.
            cycles += 1;
            let pressure = traces.pressure_mid(sites.trunk);
            if let Some(prev) = &previous {
                let diff: f64 = pressure.iter().zip(prev).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let norm: f64 = pressure.iter().map(|a| a * a).sum::<f64>().sqrt();
                if diff <= opts.tolerance * norm {
                    converged = true;
                }
            }
            if converged || cycles >= opts.max_cycles {
                break;
            }
            previous = Some(pressure);
        }
        grid.record(&mut traces, n);
    }

    let output = sample_output(&traces, sites, net.period, converged, cycles, n_steps);
    Ok(CycleRun::Done(DetailedSimulation {
        output,
        traces,
        outlet_resistance: Vec::new(),
    }))
}

fn sample_output(
    traces: &CycleTraces,
    sites: &ObservationSites,
    period: f64,
    converged: bool,
    cycles: usize,
    n_steps: usize,
) -> SimulationOutput {
    let sample = |series: &[f64]| -> Vec<f64> {
        (0..N_SAMPLES)
            .map(|i| {
                let x = (i as f64 * period / N_SAMPLES as f64) / traces.dt;
                let k = x.floor() as usize % n_steps;
                let f = x - x.floor();
                (1.0 - f) * series[k] + f * series[(k + 1) % n_steps]
            })
            .collect()
    };
    let zeros = vec![0.0; N_SAMPLES];
    let flow = |site: Option<usize>| site.map_or_else(|| zeros.clone(), |v| sample(&traces.vessels[v].q_mid));
    SimulationOutput {
        mpa_pressure: sample(&traces.pressure_mid(sites.trunk)).into_iter().map(cgs_to_mmhg).collect(),
        lpa_flow: flow(sites.left),
        rpa_flow: flow(sites.right),
        mpa_area: sample(&traces.vessels[sites.trunk].a_mid),
        converged,
        cycles_run: cycles,
        steps_per_period: n_steps,
    }
}
