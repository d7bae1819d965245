//! Inlet flow preparation from measured MPA, LPA and RPA flows.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessedFlow {
    pub q_mpa: Vec<f64>,
    /// Constant added so the mean MPA flow equals the summed branch means.
    pub mean_shift: f64,
    /// Extra constant added by the floor option.
    pub floor_shift: f64,
    /// mean(q_mpa) − mean(q_lpa) − mean(q_rpa) after all shifts.
    pub imbalance: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Shifts the MPA flow by mean(q_lpa) + mean(q_rpa) − mean(q_mpa). With
/// `floor`, a further shift lifts the minimum to zero, which breaks the
/// balance again; the remaining imbalance is reported.
pub fn preprocess_flows(q_mpa: &[f64], q_lpa: &[f64], q_rpa: &[f64], floor: bool) -> PreprocessedFlow {
    let mean_shift = mean(q_lpa) + mean(q_rpa) - mean(q_mpa);
    let mut q: Vec<f64> = q_mpa.iter().map(|v| v + mean_shift).collect();
    let min = q.iter().copied().fold(f64::INFINITY, f64::min);
    let floor_shift = if floor && min < 0.0 { -min } else { 0.0 };
    if floor_shift > 0.0 {
        q.iter_mut().for_each(|v| *v += floor_shift);
    }
    let imbalance = mean(&q) - mean(q_lpa) - mean(q_rpa);
    PreprocessedFlow {
        q_mpa: q,
        mean_shift,
        floor_shift,
        imbalance,
    }
}
