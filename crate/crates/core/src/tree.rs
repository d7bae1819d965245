//! Asymmetric structured-tree outflow model.
//!
//! Each terminal large artery feeds a self-similar binary tree whose offspring
//! radii scale by α and β at every bifurcation, so a vessel is identified by
//! how many α-steps (g) and β-steps (h) separate it from the root. Every
//! vessel in a (g, h) class has the same radius, length and subtree, which
//! lets the root impedance be computed over classes instead of vessels.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::network::FluidConstants;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuredTreeSpec {
    /// Murray exponent η.
    pub eta: f64,
    /// Offspring area ratio ζ.
    pub zeta: f64,
    /// Length-to-radius ratio.
    pub lrr: f64,
    /// Truncation radius (cm).
    pub r_min: f64,
    /// Radius of the large terminal vessel the tree is attached to (cm).
    pub r_term: f64,
    /// Wall stiffness K (g/(cm·s²)), shared with the large vessels.
    pub stiffness: f64,
    pub fluid: FluidConstants,
    /// Cardiac period (s).
    pub period: f64,
}

impl StructuredTreeSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("structured tree: {what}")));
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return bad("area ratio must lie in (0, 1]");
        }
        if !(self.eta > 0.0) {
            return bad("Murray exponent must be positive");
        }
        if !(self.lrr > 0.0) {
            return bad("length-to-radius ratio must be positive");
        }
        if !(self.r_min > 0.0) {
            return bad("r_min must be positive");
        }
        if !(self.stiffness > 0.0) || !(self.period > 0.0) {
            return bad("stiffness and period must be positive");
        }
        if self.r_term < self.r_min {
            return Err(Error::TreeVanishes {
                r_term: self.r_term,
                r_min: self.r_min,
            });
        }
        Ok(())
    }

    pub fn scaling(&self) -> Result<ScalingPair> {
        alpha_beta(self.eta, self.zeta)
    }
}

/// Offspring radius scale factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPair {
    pub alpha: f64,
    pub beta: f64,
}

pub fn alpha_beta(eta: f64, zeta: f64) -> Result<ScalingPair> {
    if !(eta > 0.0) || !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha/beta need eta > 0 and 0 < zeta <= 1 (eta={eta}, zeta={zeta})"
        )));
    }
    let alpha = (1.0 + zeta.powf(eta / 2.0)).powf(-1.0 / eta);
    Ok(ScalingPair {
        alpha,
        beta: alpha * zeta.sqrt(),
    })
}

pub fn vessel_radius(r_term: f64, pair: ScalingPair, g: u32, h: u32) -> f64 {
    r_term * pair.alpha.powi(g as i32) * pair.beta.powi(h as i32)
}

pub fn vessel_length(r: f64, lrr: f64) -> f64 {
    r * lrr
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeDepth {
    /// Smallest g with r_term·α^g < r_min.
    pub max_alpha_depth: u32,
    /// Number of distinct (g, h) classes above the truncation radius.
    pub class_count: usize,
    /// Number of individual vessels above the truncation radius.
    pub vessel_count_bound: f64,
}

fn class_exists(r_term: f64, pair: ScalingPair, r_min: f64, g: u32, h: u32) -> bool {
    vessel_radius(r_term, pair, g, h) >= r_min
}

pub fn tree_depth_stats(spec: &StructuredTreeSpec) -> Result<TreeDepth> {
    spec.validate()?;
    let pair = spec.scaling()?;
    let layout = ClassLayout::new(spec.r_term, pair, spec.r_min);
    let mut vessels = 0.0;
    let mut classes = 0;
    for (g, &hmax) in layout.h_limit.iter().enumerate() {
        for h in 0..hmax {
            classes += 1;
            vessels += binomial(g as u32 + h as u32, h as u32);
        }
    }
    Ok(TreeDepth {
        max_alpha_depth: layout.h_limit.len() as u32,
        class_count: classes,
        vessel_count_bound: vessels,
    })
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Which (g, h) classes exist: for each g, h ranges over `0..h_limit[g]`.
struct ClassLayout {
    h_limit: Vec<usize>,
}

impl ClassLayout {
    fn new(r_term: f64, pair: ScalingPair, r_min: f64) -> Self {
        let mut h_limit = Vec::new();
        let mut g = 0u32;
        while class_exists(r_term, pair, r_min, g, 0) {
            let mut h = 0u32;
            while class_exists(r_term, pair, r_min, g, h) {
                h += 1;
            }
            h_limit.push(h as usize);
            g += 1;
        }
        Self { h_limit }
    }

    fn exists(&self, g: usize, h: usize) -> bool {
        g < self.h_limit.len() && h < self.h_limit[g]
    }
}

/// Geometry and per-unit-length coefficients of one tree vessel.
#[derive(Debug, Clone, Copy)]
pub struct TreeSegment {
    pub radius: f64,
    pub length: f64,
    /// Viscous resistance per unit length, 8μ(r)/(πr⁴).
    pub resistance: f64,
    /// Inertance per unit length, ρ/A.
    pub inertance: f64,
    /// Compliance per unit length, dA/dP at the reference state = 2A/K.
    pub compliance: f64,
}

impl TreeSegment {
    fn new(spec: &StructuredTreeSpec, radius: f64, viscosity: &dyn Fn(f64) -> f64) -> Self {
        let area = PI * radius * radius;
        Self {
            radius,
            length: vessel_length(radius, spec.lrr),
            resistance: 8.0 * viscosity(radius) / (PI * radius.powi(4)),
            inertance: spec.fluid.density / area,
            compliance: 2.0 * area / spec.stiffness,
        }
    }
}

/// Input impedance of one vessel given its distal load. Implementations other
/// than the default (e.g. a Womersley-profile line) plug in here.
pub trait SegmentModel {
    fn input_impedance(&self, seg: &TreeSegment, omega: f64, load: Complex64) -> Complex64;
}

/// Lossy transmission line with series impedance iωρ/A + 8μ/(πr⁴) and shunt
/// admittance iω·2A/K. At ω = 0 it reduces to Z_L + 8μ·l/(πr⁴).
#[derive(Debug, Clone, Copy, Default)]
pub struct LossyTransmissionLine;

impl SegmentModel for LossyTransmissionLine {
    fn input_impedance(&self, seg: &TreeSegment, omega: f64, load: Complex64) -> Complex64 {
        if omega == 0.0 {
            return load + seg.resistance * seg.length;
        }
        let series = Complex64::new(seg.resistance, omega * seg.inertance);
        let shunt = Complex64::new(0.0, omega * seg.compliance);
        let kappa = (series * shunt).sqrt();
        let zc = (series / shunt).sqrt();
        let t = tanh_stable(kappa * seg.length);
        zc * (load + zc * t) / (zc + load * t)
    }
}

/// tanh(x+iy) = (sinh 2x + i sin 2y)/(cosh 2x + cos 2y), saturated for
/// large |x| where cosh overflows.
fn tanh_stable(z: Complex64) -> Complex64 {
    if z.re > 20.0 {
        return Complex64::new(1.0, 0.0);
    }
    if z.re < -20.0 {
        return Complex64::new(-1.0, 0.0);
    }
    let (x2, y2) = (2.0 * z.re, 2.0 * z.im);
    let d = x2.cosh() + y2.cos();
    Complex64::new(x2.sinh() / d, y2.sin() / d)
}

fn parallel(a: Complex64, b: Complex64) -> Complex64 {
    let sum = a + b;
    if sum == Complex64::new(0.0, 0.0) {
        Complex64::new(0.0, 0.0)
    } else {
        a * b / sum
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceSpectrum {
    /// ω_j = 2πj/T for j = 0..=n_freq (rad/s).
    pub omegas: Vec<f64>,
    /// Z(ω_j) in g/(cm⁴·s).
    pub values: Vec<Complex64>,
    pub period: f64,
}

impl ImpedanceSpectrum {
    pub fn resistance(&self) -> f64 {
        self.values[0].re
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "j,omega,re_z,im_z")?;
        for (j, (w, z)) in self.omegas.iter().zip(&self.values).enumerate() {
            writeln!(out, "{j},{w},{},{}", z.re, z.im)?;
        }
        Ok(())
    }
}

/// Root impedance for j = 0..=n_freq with constant viscosity.
pub fn root_impedance_spectrum(spec: &StructuredTreeSpec, n_freq: usize) -> Result<ImpedanceSpectrum> {
    let mu = spec.fluid.viscosity;
    root_impedance_spectrum_with(spec, n_freq, &move |_| mu, &LossyTransmissionLine)
}

/// Root impedance with a radius→viscosity law and a vessel model.
pub fn root_impedance_spectrum_with(
    spec: &StructuredTreeSpec,
    n_freq: usize,
    viscosity: &dyn Fn(f64) -> f64,
    model: &dyn SegmentModel,
) -> Result<ImpedanceSpectrum> {
    spec.validate()?;
    if n_freq < 1 {
        return Err(Error::InvalidInput("need at least one nonzero frequency".into()));
    }
    let pair = spec.scaling()?;
    let layout = ClassLayout::new(spec.r_term, pair, spec.r_min);
    let segments: Vec<Vec<TreeSegment>> = layout
        .h_limit
        .iter()
        .enumerate()
        .map(|(g, &hmax)| {
            (0..hmax)
                .map(|h| TreeSegment::new(spec, vessel_radius(spec.r_term, pair, g as u32, h as u32), viscosity))
                .collect()
        })
        .collect();

    let omegas: Vec<f64> = (0..=n_freq).map(|j| 2.0 * PI * j as f64 / spec.period).collect();
    let mut table: Vec<Vec<Complex64>> = layout.h_limit.iter().map(|&n| vec![Complex64::default(); n]).collect();
    let zero = Complex64::new(0.0, 0.0);

    let values = omegas
        .iter()
        .map(|&omega| {
            // Children of (g, h) are (g+1, h) and (g, h+1); fill from the leaves up.
            for g in (0..table.len()).rev() {
                for h in (0..table[g].len()).rev() {
                    let za = if layout.exists(g + 1, h) { table[g + 1][h] } else { zero };
                    let zb = if layout.exists(g, h + 1) { table[g][h + 1] } else { zero };
                    table[g][h] = model.input_impedance(&segments[g][h], omega, parallel(za, zb));
                }
            }
            table[0][0]
        })
        .collect();

    Ok(ImpedanceSpectrum {
        omegas,
        values,
        period: spec.period,
    })
}

/// Plain vessel-by-vessel recursion over the full binary tree. Exponential in
/// depth; kept for cross-checking the class recursion on small trees.
pub fn root_impedance_naive(spec: &StructuredTreeSpec, omega: f64) -> Result<Complex64> {
    spec.validate()?;
    let pair = spec.scaling()?;
    let mu = spec.fluid.viscosity;
    let visc = move |_: f64| mu;
    fn recurse(
        spec: &StructuredTreeSpec,
        pair: ScalingPair,
        visc: &dyn Fn(f64) -> f64,
        omega: f64,
        g: u32,
        h: u32,
    ) -> Complex64 {
        let r = vessel_radius(spec.r_term, pair, g, h);
        if r < spec.r_min {
            return Complex64::new(0.0, 0.0);
        }
        let za = recurse(spec, pair, visc, omega, g + 1, h);
        let zb = recurse(spec, pair, visc, omega, g, h + 1);
        let seg = TreeSegment::new(spec, r, visc);
        LossyTransmissionLine.input_impedance(&seg, omega, parallel(za, zb))
    }
    Ok(recurse(spec, pair, &visc, omega, 0, 0))
}

/// Time-domain impedance kernel on n_time equispaced samples over one period.
#[derive(Debug, Clone)]
pub struct ImpedanceKernel {
    /// z(t_k); pressure = Δt Σ_k z_k q(t − t_k).
    pub values: Vec<f64>,
    pub dt: f64,
    /// Largest imaginary part discarded by the inverse transform.
    pub max_imag: f64,
}

impl ImpedanceKernel {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Periodic convolution Δt Σ_k z_k q[(n−k) mod N] of a sampled flow.
    pub fn convolve_periodic(&self, flow: &[f64]) -> Vec<f64> {
        let n = self.values.len();
        assert_eq!(flow.len(), n, "flow must be sampled on the kernel grid");
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut a: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut b: Vec<Complex64> = flow.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fwd.process(&mut a);
        fwd.process(&mut b);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y;
        }
        inv.process(&mut a);
        let scale = self.dt / n as f64;
        a.iter().map(|c| c.re * scale).collect()
    }
}

/// Inverse DFT of the conjugate-symmetric extension of a spectrum.
pub fn impedance_kernel_time(spectrum: &ImpedanceSpectrum, n_time: usize) -> Result<ImpedanceKernel> {
    if n_time < 2 || n_time % 2 != 0 {
        return Err(Error::InvalidInput(format!("kernel length must be even, got {n_time}")));
    }
    let half = n_time / 2;
    if spectrum.values.len() < half + 1 {
        return Err(Error::InvalidInput(format!(
            "missing frequencies: kernel of {n_time} samples needs j = 0..={half}, spectrum has {}",
            spectrum.values.len()
        )));
    }
    let mut buf = vec![Complex64::default(); n_time];
    buf[0] = Complex64::new(spectrum.values[0].re, 0.0);
    for j in 1..half {
        buf[j] = spectrum.values[j];
        buf[n_time - j] = spectrum.values[j].conj();
    }
    buf[half] = Complex64::new(spectrum.values[half].re, 0.0);

    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n_time).process(&mut buf);
    let scale = 1.0 / spectrum.period;
    let max_imag = buf.iter().map(|c| (c.im * scale).abs()).fold(0.0, f64::max);
    Ok(ImpedanceKernel {
        values: buf.iter().map(|c| c.re * scale).collect(),
        dt: spectrum.period / n_time as f64,
        max_imag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(eta: f64, lrr: f64, r_term: f64) -> StructuredTreeSpec {
        StructuredTreeSpec {
            eta,
            zeta: 0.6,
            lrr,
            r_min: 0.005,
            r_term,
            stiffness: 226_647.4,
            fluid: FluidConstants::default(),
            period: 0.6,
        }
    }

    #[test]
    fn alpha_beta_examples() {
        let p = alpha_beta(2.0, 1.0).unwrap();
        assert!((p.alpha - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(p.alpha, p.beta);

        // Direct evaluation: (1 + 0.6^1.065)^(-1/2.13).
        let p = alpha_beta(2.13, 0.6).unwrap();
        let alpha = (1.0 + 0.6f64.powf(2.13 / 2.0)).powf(-1.0 / 2.13);
        assert!((p.alpha - alpha).abs() < 1e-15);
        assert!((p.alpha - 0.8066).abs() < 1e-3, "{}", p.alpha);
        assert!((p.beta - 0.6248).abs() < 1e-3, "{}", p.beta);

        let p = alpha_beta(3.0, 0.6).unwrap();
        let alpha = (1.0 + 0.6f64.powf(1.5)).powf(-1.0 / 3.0);
        assert!((p.alpha - alpha).abs() < 1e-15);
        assert!((p.beta - alpha * 0.6f64.sqrt()).abs() < 1e-15);
        assert!(p.beta < p.alpha && p.alpha < 1.0);

        assert!(alpha_beta(0.0, 0.6).is_err());
        assert!(alpha_beta(2.0, 1.5).is_err());
    }

    #[test]
    fn radius_and_length_examples() {
        let pair = ScalingPair { alpha: 0.8, beta: 0.6 };
        assert_eq!(vessel_radius(0.05, pair, 0, 0), 0.05);
        assert!((vessel_radius(0.05, pair, 1, 1) - 0.024).abs() < 1e-15);
        assert!((vessel_radius(0.05, pair, 2, 0) - 0.032).abs() < 1e-15);
        assert!((vessel_length(0.01, 10.0) - 0.1).abs() < 1e-15);
        assert!((vessel_length(0.005, 70.0) - 0.35).abs() < 1e-15);
        assert!((vessel_length(0.02, 2.0) - 0.04).abs() < 1e-15);
    }

    #[test]
    fn depth_examples() {
        // α = 0.8 exactly corresponds to (η, ζ) with ζ = 1 and η = ln 2 / ln 1.25.
        let eta = 2f64.ln() / 1.25f64.ln();
        let s = StructuredTreeSpec {
            zeta: 1.0,
            eta,
            r_term: 0.05,
            ..spec(2.0, 10.0, 0.05)
        };
        let pair = s.scaling().unwrap();
        assert!((pair.alpha - 0.8).abs() < 1e-12);
        // Oracle: first g with 0.05·0.8^g < 0.005.
        let mut g = 0;
        while 0.05 * 0.8f64.powi(g) >= 0.005 {
            g += 1;
        }
        assert_eq!(g, 11);
        let d = tree_depth_stats(&s).unwrap();
        assert_eq!(d.max_alpha_depth, 11);

        // With α = β, existence depends on g + h only.
        let layout = ClassLayout::new(s.r_term, pair, s.r_min);
        for g in 0..15 {
            for h in 0..15 {
                assert_eq!(layout.exists(g, h), g + h < 11, "g={g} h={h}");
            }
        }

        let vanished = StructuredTreeSpec { r_term: 0.004, ..s };
        assert!(matches!(tree_depth_stats(&vanished), Err(Error::TreeVanishes { .. })));
        assert!(matches!(root_impedance_spectrum(&vanished, 4), Err(Error::TreeVanishes { .. })));
    }

    #[test]
    fn single_vessel_resistance() {
        // Offspring of a 0.1 cm root fall below r_min = 0.09 cm.
        let s = StructuredTreeSpec {
            r_min: 0.09,
            ..spec(2.13, 10.0, 0.1)
        };
        let z = root_impedance_spectrum(&s, 2).unwrap();
        let expected = 8.0 * 0.03 * 10.0 / (PI * 0.1f64.powi(3));
        assert!((expected - 763.94).abs() < 0.01);
        assert!((z.values[0].re - expected).abs() < 1e-9 * expected);
        assert_eq!(z.values[0].im, 0.0);
    }

    #[test]
    fn equal_offspring_give_half_load() {
        let s = StructuredTreeSpec {
            zeta: 1.0,
            ..spec(2.5, 8.0, 0.05)
        };
        let pair = s.scaling().unwrap();
        let child = StructuredTreeSpec {
            r_term: s.r_term * pair.alpha,
            ..s
        };
        let zc = root_impedance_spectrum(&child, 8).unwrap();
        let zp = root_impedance_spectrum(&s, 8).unwrap();
        let seg = TreeSegment::new(&s, s.r_term, &|_| 0.03);
        for j in 0..=8 {
            let load = parallel(zc.values[j], zc.values[j]);
            assert!((load - zc.values[j] * 0.5).norm() < 1e-12 * zc.values[j].norm());
            let z = LossyTransmissionLine.input_impedance(&seg, zp.omegas[j], load);
            assert!((z - zp.values[j]).norm() < 1e-12 * z.norm());
        }
    }

    #[test]
    fn class_recursion_matches_naive_bitwise() {
        for &(eta, lrr) in &[(2.0, 10.0), (2.7, 30.0), (1.6, 5.0)] {
            let s = StructuredTreeSpec {
                r_min: 0.01,
                ..spec(eta, lrr, 0.03)
            };
            let depth = tree_depth_stats(&s).unwrap();
            assert!(depth.max_alpha_depth <= 10);
            let z = root_impedance_spectrum(&s, 16).unwrap();
            for (w, v) in z.omegas.iter().zip(&z.values) {
                let naive = root_impedance_naive(&s, *w).unwrap();
                assert_eq!(v.re.to_bits(), naive.re.to_bits());
                assert_eq!(v.im.to_bits(), naive.im.to_bits());
            }
        }
    }

    #[test]
    fn pluggable_viscosity_changes_resistance() {
        let s = spec(2.13, 10.7, 0.3);
        let base = root_impedance_spectrum(&s, 1).unwrap().resistance();
        let thick = root_impedance_spectrum_with(&s, 1, &|_| 0.06, &LossyTransmissionLine)
            .unwrap()
            .resistance();
        assert!((thick / base - 2.0).abs() < 1e-12);
    }

    #[test]
    fn resistor_kernel_is_delta() {
        let n = 16;
        let spectrum = ImpedanceSpectrum {
            omegas: (0..=n / 2).map(|j| 2.0 * PI * j as f64).collect(),
            values: vec![Complex64::new(5.0, 0.0); n / 2 + 1],
            period: 1.0,
        };
        let k = impedance_kernel_time(&spectrum, n).unwrap();
        assert!((k.values[0] - 5.0 / k.dt).abs() < 1e-10);
        assert!(k.values[1..].iter().all(|v| v.abs() < 1e-12));

        let zero = ImpedanceSpectrum {
            values: vec![Complex64::default(); n / 2 + 1],
            ..spectrum.clone()
        };
        assert!(impedance_kernel_time(&zero, n).unwrap().values.iter().all(|&v| v == 0.0));
        assert!(impedance_kernel_time(&spectrum, 2 * n).is_err());
        assert!(impedance_kernel_time(&spectrum, 15).is_err());
    }

    #[test]
    fn kernel_mean_pressure_matches_resistance() {
        let s = spec(2.4, 20.0, 0.25);
        let n = 256;
        let z = root_impedance_spectrum(&s, n / 2).unwrap();
        let k = impedance_kernel_time(&z, n).unwrap();
        assert!(k.max_imag < 1e-10 * k.norm());
        let q: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / n as f64;
                10.0 + 30.0 * (2.0 * PI * t).sin().max(0.0) + 3.0 * (6.0 * PI * t).cos()
            })
            .collect();
        let p = k.convolve_periodic(&q);
        let mean_q = q.iter().sum::<f64>() / n as f64;
        let mean_p = p.iter().sum::<f64>() / n as f64;
        assert!((mean_p - z.resistance() * mean_q).abs() < 1e-9 * mean_p.abs());

        // Direct O(N²) convolution agrees with the FFT route.
        for i in [0, 17, 200] {
            let direct: f64 = (0..n).map(|j| k.values[j] * q[(i + n - j) % n]).sum::<f64>() * k.dt;
            assert!((direct - p[i]).abs() < 1e-9 * direct.abs());
        }
    }

    #[test]
    fn spectrum_csv_dump() {
        let z = root_impedance_spectrum(&spec(2.0, 10.0, 0.05), 3).unwrap();
        let mut out = Vec::new();
        z.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("j,omega,re_z,im_z"));
    }
}
