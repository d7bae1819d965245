//! CGS unit helpers. All internal computation is CGS; pressures enter and
//! leave the crate in mmHg.

/// g/(cm·s²) per mmHg.
pub const MMHG_TO_CGS: f64 = 1333.22;

pub fn mmhg_to_cgs(p: f64) -> f64 {
    p * MMHG_TO_CGS
}

pub fn cgs_to_mmhg(p: f64) -> f64 {
    p / MMHG_TO_CGS
}
