//! Calibration of microvascular parameters of a 1D pulmonary arterial network
//! model against hemodynamic measurements.
//!
//! The forward model couples a 1D pulse-wave solver on the large vessels to
//! structured-tree impedance outlets. A PCA-reduced Gaussian-process emulator
//! stands in for the solver during DRAM sampling of the posterior.
//!
//! Modules, bottom-up:
//! - [`network`]: vessel topology, wall law, data-driven constants
//! - [`tree`]: structured-tree root impedance and its time-domain kernel
//! - [`solver`]: Lax–Wendroff network solver and observation extraction
//! - [`emulator`]: Latin hypercube design, PCA, Matérn-5/2 GPs
//! - [`calibration`]: priors, likelihood, DRAM, Geweke, uncertainty bands
//! - [`analysis`]: flow split, two-sample tests, correlations

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod calibration;
pub mod emulator;
pub mod error;
mod linalg;
pub mod network;
pub mod params;
pub mod solver;
pub mod tree;
pub mod units;

pub use error::{Error, Result};
