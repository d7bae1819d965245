//! Linear-elastic wall law P = K(√(A/A_dia) − 1) + P_dia and the quantities
//! derived from it.

/// P(A) in the units of `stiffness` and `p_dia`.
pub fn wall_pressure(area: f64, a_dia: f64, stiffness: f64, p_dia: f64) -> f64 {
    stiffness * ((area / a_dia).sqrt() - 1.0) + p_dia
}

/// Wall law of one vessel in CGS units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub a_dia: f64,
    pub stiffness: f64,
    pub p_dia: f64,
    pub density: f64,
}

impl Wall {
    pub fn pressure(&self, area: f64) -> f64 {
        wall_pressure(area, self.a_dia, self.stiffness, self.p_dia)
    }

    /// Inverse of [`Wall::pressure`].
    pub fn area(&self, pressure: f64) -> f64 {
        let s = 1.0 + (pressure - self.p_dia) / self.stiffness;
        self.a_dia * s * s
    }

    /// dP/dA
    pub fn dpressure(&self, area: f64) -> f64 {
        self.stiffness / (2.0 * (area * self.a_dia).sqrt())
    }

    /// Wave speed c with c² = (A/ρ) dP/dA.
    pub fn wave_speed(&self, area: f64) -> f64 {
        (self.stiffness * (area / self.a_dia).sqrt() / (2.0 * self.density)).sqrt()
    }

    /// B(A) with ∂B/∂x = (A/ρ) ∂P/∂x for a uniform vessel.
    pub fn flux_pressure(&self, area: f64) -> f64 {
        self.stiffness * area * area.sqrt() / (3.0 * self.density * self.a_dia.sqrt())
    }
}
