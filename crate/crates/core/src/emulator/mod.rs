//! Gaussian-process emulator of the simulator outputs.
//!
//! A Latin hypercube design is run through the solver; outputs are min-max
//! scaled, projected onto principal components, and each retained score gets
//! its own zero-mean Matérn-5/2 GP with hyperparameters fitted by Adam on the
//! negative log marginal likelihood.

mod design;
mod gp;
mod model;
mod pca;
mod scaling;

pub use design::{lhs_design, DesignMatrix};
pub use gp::{matern52, train_gp, GpComponent, GpHyper, GpOptions};
pub use model::{holdout_split, relative_rmse, EmulatorModel, EmulatorOptions, EmulatorPrediction, EMULATOR_FORMAT};
pub use pca::{fit_pca, PcaReduction};
pub use scaling::MinMaxScaler;
