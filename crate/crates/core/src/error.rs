use thiserror::Error;

/// Errors produced anywhere in the calibration stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    Network(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("tree vanishes below truncation radius (r_term = {r_term} cm, r_min = {r_min} cm)")]
    TreeVanishes { r_term: f64, r_min: f64 },

    #[error("no positive-exponent root for radii parent={parent}, d1={d1}, d2={d2}")]
    NoMurrayRoot { parent: f64, d1: f64, d2: f64 },

    #[error("nonpositive strain at systole (a_sys/a_dia = {0})")]
    NonpositiveStrain(f64),

    #[error("unstable: {0}")]
    Unstable(String),

    #[error("collapse: negative or zero area in vessel {vessel} at t = {time}")]
    Collapse { vessel: String, time: f64 },

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate chain: {0}")]
    DegenerateChain(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical method, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Unstable(_)
                | Error::Collapse { .. }
                | Error::NonFiniteLoss { .. }
                | Error::Numerical(_)
                | Error::DegenerateChain(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
