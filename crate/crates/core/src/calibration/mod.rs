//! Bayesian calibration of the microvascular parameters.
//!
//! The posterior combines truncated-Gaussian or uniform priors with a
//! Gaussian likelihood whose variance is shared within each data source.
//! θ moves by delayed-rejection adaptive Metropolis; after every move the
//! four noise variances are redrawn from their inverse-gamma conditionals.

mod dram;
mod forward;
mod geweke;
mod likelihood;
mod prior;
mod propagate;
mod summary;
mod target;

pub use dram::{dram_sample, DramOptions, DramTarget, PosteriorChain};
pub use forward::{EmulatorForward, ForwardModel, SolverForward};
pub use geweke::{geweke_test, GewekeResult};
pub use likelihood::{
    log_likelihood, residual_sums, source_of, source_range, update_noise, NoiseModel, ObservationVector, SOURCES,
    SOURCE_SIZES,
};
pub use prior::{PriorFamily, PriorKind, PriorSpec, ETA_PRIOR, LRR_PRIOR};
pub use propagate::{propagate_uncertainty, quantile_sorted, Band, Propagation};
pub use summary::{read_chain_csv, write_chain_csv, CalibrationSummary, MarginalSummary, ParameterSummary};
pub use target::{calibrate, CalibrationTarget};
