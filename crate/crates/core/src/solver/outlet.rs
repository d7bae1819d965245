//! Structured-tree outlet coupling: p(L, t) = Δt Σ_k z_k q(L, t − t_k).

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::linalg::dot;
use crate::tree::ImpedanceKernel;

/// Convolution state for one outlet over a periodic time grid of N steps.
///
/// The sum splits into terms reaching back into the previous cycle, which are
/// known when the cycle starts and come from one FFT, and terms within the
/// current cycle, accumulated step by step.
pub struct OutletLoad {
    /// Δt·z_k
    weights: Vec<f64>,
    /// Flow over the previous cycle.
    prev: Vec<f64>,
    /// Current-cycle flow stored reversed: rev[N−1−i] = q[i].
    rev: Vec<f64>,
    /// Previous-cycle contribution to the pressure at each step of this cycle.
    carry: Vec<f64>,
    filled: usize,
}

impl OutletLoad {
    /// `q_history` is the flow assumed over the cycle before t = 0.
    pub fn new(kernel: &ImpedanceKernel, q_history: f64) -> Self {
        let n = kernel.values.len();
        let weights: Vec<f64> = kernel.values.iter().map(|z| z * kernel.dt).collect();
        let mut load = Self {
            weights,
            prev: vec![q_history; n],
            rev: vec![0.0; n],
            carry: vec![0.0; n],
            filled: 0,
        };
        load.carry = load.previous_cycle_carry();
        load
    }

    fn len(&self) -> usize {
        self.weights.len()
    }

    /// Instantaneous resistance Δt·z_0 multiplying the current flow.
    pub fn r0(&self) -> f64 {
        self.weights[0]
    }

    /// Pressure contribution of all past flows at the next step.
    pub fn history_pressure(&self) -> f64 {
        let n = self.len();
        let k = self.filled;
        // Σ_{j=1}^{k} w_j q[k−j] = dot(w[1..=k], rev[N−k..N]).
        self.carry[k] + dot(&self.weights[1..=k], &self.rev[n - k..n])
    }

    /// Records the flow at the next step; returns true when a cycle completes.
    pub fn push(&mut self, q: f64) -> bool {
        let n = self.len();
        self.rev[n - 1 - self.filled] = q;
        self.filled += 1;
        if self.filled == n {
            for i in 0..n {
                self.prev[i] = self.rev[n - 1 - i];
            }
            self.filled = 0;
            self.carry = self.previous_cycle_carry();
            true
        } else {
            false
        }
    }

    /// carry[n] = Σ_{k=n+1}^{N−1} w_k prev[N + n − k], read off a zero-padded
    /// linear convolution at index N + n.
    fn previous_cycle_carry(&self) -> Vec<f64> {
        let n = self.len();
        let m = 2 * n;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let mut a = vec![Complex64::default(); m];
        let mut b = vec![Complex64::default(); m];
        for i in 0..n {
            a[i].re = self.weights[i];
            b[i].re = self.prev[i];
        }
        fwd.process(&mut a);
        fwd.process(&mut b);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y;
        }
        inv.process(&mut a);
        (0..n).map(|i| a[n + i].re / m as f64).collect()
    }
}
