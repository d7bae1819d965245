//! Newton closures for vessel ends given the extrapolated outgoing invariant.

use nalgebra::{DMatrix, DVector};

use super::wall::Wall;
use crate::error::{Error, Result};

const MAX_NEWTON: usize = 60;
const NEWTON_TOL: f64 = 1e-10;

/// Outgoing invariant W = u + sign·4c(A) at a vessel end; sign is +1 at the
/// distal end and −1 at the proximal end.
#[derive(Debug, Clone, Copy)]
pub(super) struct Characteristic {
    pub invariant: f64,
    pub sign: f64,
    pub wall: Wall,
}

impl Characteristic {
    /// Flow compatible with the invariant at area `a`.
    pub fn flow(&self, a: f64) -> f64 {
        a * (self.invariant - self.sign * 4.0 * self.wall.wave_speed(a))
    }

    /// dQ/dA along the characteristic; c ∝ A^{1/4} gives A·dc/dA = c/4.
    pub fn dflow(&self, a: f64) -> f64 {
        self.invariant - self.sign * 5.0 * self.wall.wave_speed(a)
    }
}

fn newton_1d(mut a: f64, f: impl Fn(f64) -> (f64, f64), what: &str) -> Result<f64> {
    for _ in 0..MAX_NEWTON {
        let (r, dr) = f(a);
        if !(dr.is_finite() && dr != 0.0) {
            break;
        }
        let mut step = r / dr;
        while a - step <= 0.0 {
            step *= 0.5;
        }
        a -= step;
        if step.abs() <= NEWTON_TOL * a {
            return Ok(a);
        }
    }
    Err(Error::Numerical(format!("{what} Newton iteration did not converge")))
}

/// Area at the inlet given prescribed flow: Q/A − 4c(A) = W₋.
pub(super) fn solve_inlet(ch: &Characteristic, q: f64, guess: f64) -> Result<f64> {
    newton_1d(
        guess,
        |a| {
            let c = ch.wall.wave_speed(a);
            (q / a + ch.sign * 4.0 * c - ch.invariant, -q / (a * a) + ch.sign * c / a)
        },
        "inlet",
    )
}

/// Outlet state where P(A) = r0·Q + H and Q follows the characteristic.
pub(super) fn solve_outlet(ch: &Characteristic, r0: f64, history: f64, guess: f64) -> Result<(f64, f64)> {
    let a = newton_1d(
        guess,
        |a| {
            (
                ch.wall.pressure(a) - r0 * ch.flow(a) - history,
                ch.wall.dpressure(a) - r0 * ch.dflow(a),
            )
        },
        "outlet",
    )?;
    Ok((a, ch.flow(a)))
}

#[derive(Debug, Clone)]
pub(super) struct JunctionState {
    pub areas: Vec<f64>,
    pub flows: Vec<f64>,
}

/// Parent distal end coupled to daughter proximal ends by flow conservation
/// and pressure continuity.
pub(super) fn solve_junction(
    parent: &Characteristic,
    daughters: &[Characteristic],
    guess: &[f64],
) -> Result<JunctionState> {
    let n = daughters.len() + 1;
    let link = |i: usize| if i == 0 { parent } else { &daughters[i - 1] };
    let mut a = guess.to_vec();
    let mut jac = DMatrix::<f64>::zeros(n, n);
    let mut res = DVector::<f64>::zeros(n);
    for _ in 0..MAX_NEWTON {
        res[0] = link(0).flow(a[0]) - (1..n).map(|i| link(i).flow(a[i])).sum::<f64>();
        jac.fill(0.0);
        jac[(0, 0)] = link(0).dflow(a[0]);
        let p0 = link(0).wall.pressure(a[0]);
        let dp0 = link(0).wall.dpressure(a[0]);
        for i in 1..n {
            jac[(0, i)] = -link(i).dflow(a[i]);
            res[i] = p0 - link(i).wall.pressure(a[i]);
            jac[(i, 0)] = dp0;
            jac[(i, i)] = -link(i).wall.dpressure(a[i]);
        }
        let step = jac
            .clone()
            .lu()
            .solve(&res)
            .ok_or_else(|| Error::Numerical("singular junction Jacobian".into()))?;
        let mut scale = 1.0;
        while (0..n).any(|i| a[i] - scale * step[i] <= 0.0) {
            scale *= 0.5;
        }
        let mut rel = 0.0f64;
        for i in 0..n {
            a[i] -= scale * step[i];
            rel = rel.max((scale * step[i]).abs() / a[i]);
        }
        if rel <= NEWTON_TOL {
            let flows = (0..n).map(|i| link(i).flow(a[i])).collect();
            return Ok(JunctionState { areas: a, flows });
        }
    }
    Err(Error::Numerical("junction Newton iteration did not converge".into()))
}
