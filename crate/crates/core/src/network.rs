//! Large-vessel computational domain: topology, geometry, wall law and fluid
//! constants, plus the data-driven constants derived from them.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::mmhg_to_cgs;

/// Population area ratio used when a network does not specify one.
pub const DEFAULT_AREA_RATIO: f64 = 0.6;
/// Structured-tree truncation radius (cm).
pub const DEFAULT_R_MIN: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidConstants {
    /// Blood density (g/mL).
    pub density: f64,
    /// Dynamic viscosity (g/(cm·s)).
    pub viscosity: f64,
    /// Power-law velocity profile exponent.
    pub profile_exponent: f64,
}

impl Default for FluidConstants {
    fn default() -> Self {
        Self {
            density: 1.03,
            viscosity: 0.03,
            profile_exponent: 5.0,
        }
    }
}

impl FluidConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0) || !(self.viscosity > 0.0) || !(self.profile_exponent >= 2.0) {
            return Err(Error::Network(format!(
                "fluid constants out of range: rho={}, mu={}, gamma={}",
                self.density, self.viscosity, self.profile_exponent
            )));
        }
        Ok(())
    }

    /// Momentum-flux correction (γ+2)/(γ+1) of the power-law profile.
    pub fn momentum_correction(&self) -> f64 {
        (self.profile_exponent + 2.0) / (self.profile_exponent + 1.0)
    }

    /// Coefficient of the viscous drag term, 2πμ(γ+2)/ρ.
    pub fn friction_coefficient(&self) -> f64 {
        2.0 * PI * self.viscosity * (self.profile_exponent + 2.0) / self.density
    }
}

/// Which lung's microvascular parameters apply at a vessel's outlet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    #[default]
    Trunk,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VesselSegment {
    pub id: String,
    /// cm
    pub length: f64,
    /// Radius at the diastolic reference pressure (cm).
    pub radius_dia: f64,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub side: Side,
}

impl VesselSegment {
    pub fn area_dia(&self) -> f64 {
        PI * self.radius_dia * self.radius_dia
    }

    pub fn is_outlet(&self) -> bool {
        self.children.is_empty()
    }
}

/// Linear-elastic wall law shared by every vessel, large and small.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallModel {
    stiffness_mmhg: f64,
    p_dia_mmhg: f64,
}

impl WallModel {
    pub fn new(stiffness_mmhg: f64, p_dia_mmhg: f64) -> Result<Self> {
        if !(stiffness_mmhg > 0.0) || !stiffness_mmhg.is_finite() {
            return Err(Error::Network(format!("stiffness must be positive, got {stiffness_mmhg}")));
        }
        if !p_dia_mmhg.is_finite() {
            return Err(Error::Network("diastolic pressure must be finite".into()));
        }
        Ok(Self {
            stiffness_mmhg,
            p_dia_mmhg,
        })
    }

    /// K in g/(cm·s²).
    pub fn stiffness(&self) -> f64 {
        mmhg_to_cgs(self.stiffness_mmhg)
    }

    /// P_dia in g/(cm·s²).
    pub fn p_dia(&self) -> f64 {
        mmhg_to_cgs(self.p_dia_mmhg)
    }

    pub fn stiffness_mmhg(&self) -> f64 {
        self.stiffness_mmhg
    }

    pub fn p_dia_mmhg(&self) -> f64 {
        self.p_dia_mmhg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArterialNetwork {
    pub name: String,
    pub vessels: Vec<VesselSegment>,
    pub wall: WallModel,
    pub fluid: FluidConstants,
    /// Cardiac period (s).
    pub period: f64,
    pub inlet: usize,
    pub outlets: Vec<usize>,
    /// Offspring area ratio ζ used by the outflow trees.
    pub area_ratio: f64,
    /// Truncation radius of the outflow trees (cm).
    pub r_min: f64,
    config: NetworkConfig,
}

/// A bifurcation given by vessel indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bifurcation {
    pub parent: usize,
    pub daughters: [usize; 2],
}

impl ArterialNetwork {
    pub fn vessel(&self, id: &str) -> Option<&VesselSegment> {
        self.vessels.iter().find(|v| v.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.vessels.iter().position(|v| v.id == id)
    }

    pub fn bifurcations(&self) -> Vec<Bifurcation> {
        self.vessels
            .iter()
            .enumerate()
            .filter(|(_, v)| v.children.len() == 2)
            .map(|(i, v)| Bifurcation {
                parent: i,
                daughters: [v.children[0], v.children[1]],
            })
            .collect()
    }

    /// Outlets feeding the given lung.
    pub fn outlets_on(&self, side: Side) -> impl Iterator<Item = usize> + '_ {
        self.outlets.iter().copied().filter(move |&o| self.vessels[o].side == side)
    }

    /// Murray exponent solved at every bifurcation.
    pub fn murray_exponents(&self) -> Result<Vec<f64>> {
        self.bifurcations()
            .iter()
            .map(|b| {
                let rp = self.vessels[b.parent].radius_dia;
                let r1 = self.vessels[b.daughters[0]].radius_dia;
                let r2 = self.vessels[b.daughters[1]].radius_dia;
                solve_murray_exponent(rp, r1.max(r2), r1.min(r2))
            })
            .collect()
    }

    /// The configuration this network was parsed from, normalized so that it
    /// reparses to an identical network.
    pub fn to_config(&self) -> NetworkConfig {
        self.config.clone()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_config())?)
    }
}

// ---------------------------------------------------------------------------
// Configuration schema

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselConfig {
    pub id: String,
    pub length_cm: f64,
    pub radius_cm: f64,
    #[serde(default)]
    pub children: Vec<String>,
    #[serde(default)]
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AreaRatioConfig {
    Value(f64),
    /// `"median"`: median smaller/larger offspring area ratio over the network.
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default)]
    pub name: String,
    pub period_s: f64,
    #[serde(rename = "p_dia_mmHg")]
    pub p_dia_mmhg: f64,
    #[serde(rename = "p_sys_mmHg", default, skip_serializing_if = "Option::is_none")]
    pub p_sys_mmhg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_sys_over_a_dia: Option<f64>,
    #[serde(rename = "stiffness_mmHg", default, skip_serializing_if = "Option::is_none")]
    pub stiffness_mmhg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fluid: Option<FluidConstants>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_ratio: Option<AreaRatioConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min_cm: Option<f64>,
    pub vessels: Vec<VesselConfig>,
}

/// Parses and validates a JSON network configuration.
pub fn parse_network(config_text: &str) -> Result<ArterialNetwork> {
    let config: NetworkConfig = serde_json::from_str(config_text)
        .map_err(|e| Error::Network(format!("schema violation: {e}")))?;
    build_network(config)
}

pub fn build_network(config: NetworkConfig) -> Result<ArterialNetwork> {
    if config.vessels.is_empty() {
        return Err(Error::Network("no vessels".into()));
    }
    if !(config.period_s > 0.0) || !config.period_s.is_finite() {
        return Err(Error::Network(format!("period must be positive, got {}", config.period_s)));
    }
    let fluid = config.fluid.unwrap_or_default();
    fluid.validate()?;

    let mut index = HashMap::new();
    for (i, v) in config.vessels.iter().enumerate() {
        if index.insert(v.id.as_str(), i).is_some() {
            return Err(Error::Network(format!("duplicate vessel id '{}'", v.id)));
        }
        if !(v.length_cm > 0.0) || !v.length_cm.is_finite() {
            return Err(Error::Network(format!("nonpositive dimension: length of '{}'", v.id)));
        }
        if !(v.radius_cm > 0.0) || !v.radius_cm.is_finite() {
            return Err(Error::Network(format!("nonpositive dimension: radius of '{}'", v.id)));
        }
        if v.children.len() == 1 {
            return Err(Error::Network(format!("vessel '{}' has exactly one child", v.id)));
        }
        if v.children.len() > 2 {
            return Err(Error::Network(format!(
                "vessel '{}' has {} children; only bifurcations are supported",
                v.id,
                v.children.len()
            )));
        }
    }

    let mut vessels: Vec<VesselSegment> = config
        .vessels
        .iter()
        .map(|v| VesselSegment {
            id: v.id.clone(),
            length: v.length_cm,
            radius_dia: v.radius_cm,
            parent: None,
            children: Vec::new(),
            side: v.side,
        })
        .collect();

    for (i, v) in config.vessels.iter().enumerate() {
        for child in &v.children {
            let &c = index
                .get(child.as_str())
                .ok_or_else(|| Error::Network(format!("dangling reference '{child}' in '{}'", v.id)))?;
            if c == i {
                return Err(Error::Network(format!("cyclic connectivity: '{}' is its own child", v.id)));
            }
            if vessels[c].parent.is_some() {
                return Err(Error::Network(format!("vessel '{child}' has more than one parent")));
            }
            vessels[c].parent = Some(i);
            vessels[i].children.push(c);
        }
    }

    let roots: Vec<usize> = (0..vessels.len()).filter(|&i| vessels[i].parent.is_none()).collect();
    let inlet = match roots.as_slice() {
        [r] => *r,
        [] => return Err(Error::Network("cyclic connectivity: no root vessel".into())),
        _ => {
            let ids: Vec<&str> = roots.iter().map(|&r| vessels[r].id.as_str()).collect();
            return Err(Error::Network(format!("multiple root vessels: {}", ids.join(", "))));
        }
    };

    // With one root and at most one parent per vessel, anything unreachable
    // from the root lies on a cycle.
    let mut seen = HashSet::new();
    let mut stack = vec![inlet];
    while let Some(v) = stack.pop() {
        if seen.insert(v) {
            stack.extend(vessels[v].children.iter().copied());
        }
    }
    if seen.len() != vessels.len() {
        return Err(Error::Network("cyclic connectivity".into()));
    }

    let outlets: Vec<usize> = (0..vessels.len()).filter(|&i| vessels[i].is_outlet()).collect();

    let stiffness_mmhg = match (config.stiffness_mmhg, config.p_sys_mmhg, config.a_sys_over_a_dia) {
        (Some(k), _, _) => k,
        (None, Some(p_sys), Some(ratio)) => compute_stiffness(p_sys, config.p_dia_mmhg, ratio, 1.0)?,
        _ => {
            return Err(Error::Network(
                "schema violation: need stiffness_mmHg or (p_sys_mmHg and a_sys_over_a_dia)".into(),
            ))
        }
    };
    let wall = WallModel::new(stiffness_mmhg, config.p_dia_mmhg)?;

    let r_min = config.r_min_cm.unwrap_or(DEFAULT_R_MIN);
    if !(r_min > 0.0) {
        return Err(Error::Network(format!("nonpositive dimension: r_min = {r_min}")));
    }

    let mut network = ArterialNetwork {
        name: config.name.clone(),
        vessels,
        wall,
        fluid,
        period: config.period_s,
        inlet,
        outlets,
        area_ratio: DEFAULT_AREA_RATIO,
        r_min,
        config: NetworkConfig::default_placeholder(),
    };

    network.area_ratio = match &config.area_ratio {
        None => DEFAULT_AREA_RATIO,
        Some(AreaRatioConfig::Value(z)) => *z,
        Some(AreaRatioConfig::Keyword(k)) if k == "median" => median_area_ratio(&network)?,
        Some(AreaRatioConfig::Keyword(k)) => {
            return Err(Error::Network(format!("schema violation: area_ratio '{k}'")))
        }
    };
    if !(network.area_ratio > 0.0 && network.area_ratio <= 1.0) {
        return Err(Error::Network(format!("area ratio must lie in (0, 1], got {}", network.area_ratio)));
    }

    let mut normalized = config;
    if normalized.stiffness_mmhg.is_none() {
        normalized.stiffness_mmhg = Some(stiffness_mmhg);
        normalized.a_sys_over_a_dia = None;
    }
    normalized.fluid = Some(fluid);
    normalized.area_ratio = Some(AreaRatioConfig::Value(network.area_ratio));
    normalized.r_min_cm = Some(r_min);
    network.config = normalized;
    Ok(network)
}

impl NetworkConfig {
    fn default_placeholder() -> Self {
        Self {
            name: String::new(),
            period_s: 0.0,
            p_dia_mmhg: 0.0,
            p_sys_mmhg: None,
            a_sys_over_a_dia: None,
            stiffness_mmhg: None,
            fluid: None,
            area_ratio: None,
            r_min_cm: None,
            vessels: Vec::new(),
        }
    }
}

/// Wall stiffness from one systolic pressure/area measurement, inverting the
/// linear wall law at systole. Pressures in any consistent unit.
pub fn compute_stiffness(p_sys: f64, p_dia: f64, a_sys: f64, a_dia: f64) -> Result<f64> {
    if !(a_dia > 0.0) {
        return Err(Error::InvalidInput(format!("diastolic area must be positive, got {a_dia}")));
    }
    let ratio = a_sys / a_dia;
    if !(ratio > 1.0) {
        return Err(Error::NonpositiveStrain(ratio));
    }
    if !(p_sys > p_dia) {
        return Err(Error::InvalidInput(format!(
            "systolic pressure {p_sys} must exceed diastolic {p_dia}"
        )));
    }
    Ok((p_sys - p_dia) / (ratio.sqrt() - 1.0))
}

/// Median over bifurcations of smaller/larger offspring area.
pub fn median_area_ratio(net: &ArterialNetwork) -> Result<f64> {
    let mut ratios: Vec<f64> = net
        .bifurcations()
        .iter()
        .map(|b| {
            let a1 = net.vessels[b.daughters[0]].area_dia();
            let a2 = net.vessels[b.daughters[1]].area_dia();
            a1.min(a2) / a1.max(a2)
        })
        .collect();
    if ratios.is_empty() {
        return Err(Error::Network("no bifurcations to take an area ratio from".into()));
    }
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len();
    Ok(if n % 2 == 1 {
        ratios[n / 2]
    } else {
        0.5 * (ratios[n / 2 - 1] + ratios[n / 2])
    })
}

/// Solves r_p^η = r_d1^η + r_d2^η for η > 0 by safeguarded Newton iteration.
///
/// The residual f(η) = (r_d1/r_p)^η + (r_d2/r_p)^η − 1 is strictly
/// decreasing, so a bracket is kept and Newton steps leaving it fall back to
/// bisection. The initial bracket is [0.1, 10]; it is widened only when the
/// root lies outside (offspring nearly as wide as the parent, or tiny).
pub fn solve_murray_exponent(r_p: f64, r_d1: f64, r_d2: f64) -> Result<f64> {
    let err = || Error::NoMurrayRoot {
        parent: r_p,
        d1: r_d1,
        d2: r_d2,
    };
    if !(r_p > 0.0 && r_d1 > 0.0 && r_d2 > 0.0) || r_d1 >= r_p || r_d2 >= r_p {
        return Err(err());
    }
    let a = r_d1 / r_p;
    let b = r_d2 / r_p;
    let (la, lb) = (a.ln(), b.ln());
    let f = |eta: f64| a.powf(eta) + b.powf(eta) - 1.0;
    let df = |eta: f64| a.powf(eta) * la + b.powf(eta) * lb;

    let (mut lo, mut hi) = (0.1_f64, 10.0_f64);
    while f(lo) < 0.0 {
        lo *= 0.5;
        if lo < 1e-12 {
            return Err(err());
        }
    }
    while f(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(err());
        }
    }

    let mut eta = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(eta);
        if fx.abs() < 1e-14 {
            return Ok(eta);
        }
        if fx > 0.0 {
            lo = eta;
        } else {
            hi = eta;
        }
        let d = df(eta);
        let newton = eta - fx / d;
        eta = if d < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 * hi {
            break;
        }
    }
    if f(eta).abs() < 1e-10 {
        Ok(eta)
    } else {
        Err(Error::Numerical(format!("Murray exponent iteration stalled at {eta}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn y_config() -> String {
        r#"{
            "name": "y",
            "period_s": 0.6,
            "p_dia_mmHg": 8.0,
            "p_sys_mmHg": 25.0,
            "a_sys_over_a_dia": 1.21,
            "vessels": [
                {"id": "MPA", "length_cm": 4.0, "radius_cm": 0.6, "children": ["LPA", "RPA"]},
                {"id": "LPA", "length_cm": 3.0, "radius_cm": 0.4, "side": "left"},
                {"id": "RPA", "length_cm": 3.5, "radius_cm": 0.42, "side": "right"}
            ]
        }"#
        .to_string()
    }

    #[test]
    fn single_vessel_is_its_own_outlet() {
        let net = parse_network(
            r#"{"period_s": 1.0, "p_dia_mmHg": 8, "stiffness_mmHg": 100,
                "vessels": [{"id": "A", "length_cm": 2, "radius_cm": 0.3, "side": "left"}]}"#,
        )
        .unwrap();
        assert_eq!(net.outlets, vec![0]);
        assert_eq!(net.inlet, 0);
    }

    #[test]
    fn y_network_has_two_outlets() {
        let net = parse_network(&y_config()).unwrap();
        assert_eq!(net.vessels[net.inlet].id, "MPA");
        assert_eq!(net.outlets.len(), 2);
        assert!((net.wall.stiffness_mmhg() - 170.0).abs() < 1e-9);
        assert_eq!(net.area_ratio, DEFAULT_AREA_RATIO);
    }

    #[test]
    fn dangling_reference_is_rejected() {
        let text = y_config().replace("\"RPA\"]", "\"XPA\"]");
        let err = parse_network(&text).unwrap_err();
        assert!(err.to_string().contains("dangling reference"), "{err}");
    }

    #[test]
    fn one_child_and_cycles_are_rejected() {
        let one = r#"{"period_s": 1.0, "p_dia_mmHg": 8, "stiffness_mmHg": 100, "vessels": [
            {"id": "A", "length_cm": 2, "radius_cm": 0.3, "children": ["B"]},
            {"id": "B", "length_cm": 2, "radius_cm": 0.2}]}"#;
        assert!(parse_network(one).unwrap_err().to_string().contains("exactly one child"));

        let cyc = r#"{"period_s": 1.0, "p_dia_mmHg": 8, "stiffness_mmHg": 100, "vessels": [
            {"id": "R", "length_cm": 2, "radius_cm": 0.3, "children": ["S", "T"]},
            {"id": "S", "length_cm": 2, "radius_cm": 0.2},
            {"id": "T", "length_cm": 2, "radius_cm": 0.2},
            {"id": "A", "length_cm": 2, "radius_cm": 0.3, "children": ["B", "C"]},
            {"id": "B", "length_cm": 2, "radius_cm": 0.2, "children": ["A", "D"]},
            {"id": "C", "length_cm": 2, "radius_cm": 0.2},
            {"id": "D", "length_cm": 2, "radius_cm": 0.2}]}"#;
        assert!(parse_network(cyc).unwrap_err().to_string().contains("cyclic"));
    }

    #[test]
    fn nonpositive_dimensions_are_rejected() {
        let text = y_config().replace("\"length_cm\": 3.0", "\"length_cm\": -3.0");
        assert!(parse_network(&text).unwrap_err().to_string().contains("nonpositive"));
    }

    #[test]
    fn unknown_fields_are_schema_violations() {
        let text = y_config().replace("\"name\": \"y\"", "\"nmae\": \"y\"");
        assert!(parse_network(&text).unwrap_err().to_string().contains("schema"));
    }

    #[test]
    fn stiffness_examples() {
        let k = compute_stiffness(25.0, 8.0, 1.21, 1.0).unwrap();
        assert!((k - 170.0).abs() < 1e-9);
        assert!((mmhg_to_cgs(k) - 226_647.4).abs() < 0.1);
        assert!(matches!(compute_stiffness(25.0, 8.0, 1.0, 1.0), Err(Error::NonpositiveStrain(_))));
        let eps = 1e-3;
        assert!((compute_stiffness(8.0 + eps, 8.0, 4.0, 1.0).unwrap() - eps).abs() < 1e-12);
    }

    #[test]
    fn area_ratio_examples() {
        let mk = |r1: f64, r2: f64| {
            parse_network(&format!(
                r#"{{"period_s": 1.0, "p_dia_mmHg": 8, "stiffness_mmHg": 100, "vessels": [
                {{"id": "P", "length_cm": 2, "radius_cm": 0.5, "children": ["A", "B"]}},
                {{"id": "A", "length_cm": 2, "radius_cm": {r1}}},
                {{"id": "B", "length_cm": 2, "radius_cm": {r2}}}]}}"#
            ))
            .unwrap()
        };
        assert!((median_area_ratio(&mk(0.3, 0.3)).unwrap() - 1.0).abs() < 1e-15);
        assert!((median_area_ratio(&mk(0.4, 0.2)).unwrap() - 0.25).abs() < 1e-12);
        assert!((median_area_ratio(&mk(0.2, 0.4)).unwrap() - 0.25).abs() < 1e-12);

        let single = parse_network(
            r#"{"period_s": 1.0, "p_dia_mmHg": 8, "stiffness_mmHg": 100,
                "vessels": [{"id": "A", "length_cm": 2, "radius_cm": 0.3}]}"#,
        )
        .unwrap();
        assert!(median_area_ratio(&single).is_err());
        assert_eq!(single.area_ratio, 0.6);
    }

    #[test]
    fn median_of_even_count_is_midpoint() {
        let net = parse_network(
            r#"{"period_s": 1.0, "p_dia_mmHg": 8, "stiffness_mmHg": 100, "area_ratio": "median", "vessels": [
            {"id": "P", "length_cm": 2, "radius_cm": 0.5, "children": ["A", "B"]},
            {"id": "A", "length_cm": 2, "radius_cm": 0.4, "children": ["C", "D"]},
            {"id": "B", "length_cm": 2, "radius_cm": 0.2},
            {"id": "C", "length_cm": 2, "radius_cm": 0.3},
            {"id": "D", "length_cm": 2, "radius_cm": 0.3}]}"#,
        )
        .unwrap();
        assert!((net.area_ratio - 0.625).abs() < 1e-12);
    }

    /// Bisection on f(η) = 0.9^η + 0.6^η − 1, independent of the Newton path.
    fn bisection_oracle(a: f64, b: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 50.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if a.powf(mid) + b.powf(mid) - 1.0 > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn murray_exponent_examples() {
        let cube = solve_murray_exponent(1.0, 2f64.powf(-1.0 / 3.0), 2f64.powf(-1.0 / 3.0)).unwrap();
        assert!((cube - 3.0).abs() < 1e-10);
        let square = solve_murray_exponent(1.0, 0.5f64.sqrt(), 0.5f64.sqrt()).unwrap();
        assert!((square - 2.0).abs() < 1e-10);

        let oracle = bisection_oracle(0.9, 0.6);
        let eta = solve_murray_exponent(1.0, 0.9, 0.6).unwrap();
        assert!((eta - oracle).abs() < 1e-10, "{eta} vs {oracle}");
        assert!((eta - 2.72).abs() < 0.01);

        assert!(matches!(solve_murray_exponent(1.0, 1.0, 0.5), Err(Error::NoMurrayRoot { .. })));
        assert!(matches!(solve_murray_exponent(1.0, 0.5, 1.2), Err(Error::NoMurrayRoot { .. })));
    }

    #[test]
    fn serialized_network_reparses_identically() {
        let net = parse_network(&y_config()).unwrap();
        let again = parse_network(&net.to_json().unwrap()).unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn network_murray_exponents() {
        let net = parse_network(&y_config()).unwrap();
        let etas = net.murray_exponents().unwrap();
        assert_eq!(etas.len(), 1);
        let (rp, r1, r2) = (0.6f64, 0.42f64, 0.4f64);
        assert!((rp.powf(etas[0]) - r1.powf(etas[0]) - r2.powf(etas[0])).abs() < 1e-12);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn stiffness_inverts_wall_law(p_dia in 0.0f64..30.0, dp in 0.5f64..60.0, ratio in 1.01f64..3.0) {
                let k = compute_stiffness(p_dia + dp, p_dia, ratio, 1.0).unwrap();
                let p = k * (ratio.sqrt() - 1.0) + p_dia;
                prop_assert!(((p - (p_dia + dp)) / (p_dia + dp)).abs() < 1e-12);
            }

            #[test]
            fn murray_exponent_recovers_generated_radii(eta in 0.5f64..6.0, zeta in 0.05f64..1.0) {
                let alpha = (1.0 + zeta.powf(eta / 2.0)).powf(-1.0 / eta);
                let beta = alpha * zeta.sqrt();
                let got = solve_murray_exponent(1.0, alpha, beta).unwrap();
                prop_assert!((got - eta).abs() < 1e-8, "{} vs {}", got, eta);
            }

            #[test]
            fn median_is_permutation_invariant(seed in 0u64..1000) {
                let radii = [(0.5, 0.4, 0.3), (0.4, 0.35, 0.2), (0.3, 0.25, 0.2)];
                let mut vessels: Vec<String> = Vec::new();
                vessels.push(r#"{"id":"R","length_cm":1,"radius_cm":0.9,"children":["P0","X"]}"#.into());
                vessels.push(r#"{"id":"X","length_cm":1,"radius_cm":0.5,"children":["P1","P2"]}"#.into());
                for (i, (p, a, b)) in radii.iter().enumerate() {
                    vessels.push(format!(r#"{{"id":"P{i}","length_cm":1,"radius_cm":{p},"children":["A{i}","B{i}"]}}"#));
                    vessels.push(format!(r#"{{"id":"A{i}","length_cm":1,"radius_cm":{a}}}"#));
                    vessels.push(format!(r#"{{"id":"B{i}","length_cm":1,"radius_cm":{b}}}"#));
                }
                let text = |vs: &[String]| format!(
                    r#"{{"period_s":1,"p_dia_mmHg":8,"stiffness_mmHg":100,"vessels":[{}]}}"#, vs.join(","));
                let base = median_area_ratio(&parse_network(&text(&vessels)).unwrap()).unwrap();
                let mut shuffled = vessels.clone();
                let n = shuffled.len();
                let mut s = seed;
                for i in (1..n).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    shuffled.swap(i, (s >> 33) as usize % (i + 1));
                }
                let perm = median_area_ratio(&parse_network(&text(&shuffled)).unwrap()).unwrap();
                prop_assert_eq!(base, perm);
            }
        }
    }
}
