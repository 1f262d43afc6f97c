//! Agent state, physical bounds and scenario configuration.
//!
//! A scenario is a TOML document whose keys mirror the field names of
//! [`ScenarioConfig`]. Every parameter section except `agents` is optional and
//! falls back to the defaults below.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

/// Standard gravity used to convert g-loads into m/s^2.
pub const GRAVITY: f64 = 9.81;

const BUNDLED: &[(&str, &str)] = &[("threeVthree", include_str!("../scenarios/threeVthree.toml"))];

/// Position/velocity pair of a double-integrator agent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vec3,
    pub velocity: Vec3,
}

impl AgentState {
    pub const fn new(position: Vec3, velocity: Vec3) -> Self {
        Self { position, velocity }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalBounds {
    /// Speed bound (m/s).
    pub v_max: f64,
    /// Acceleration-norm bound (m/s^2).
    pub u_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Effector,
    Target,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Effector => "effector",
            Role::Target => "target",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub id: u32,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assigned_target: Option<u32>,
    pub initial: AgentState,
    pub bounds: PhysicalBounds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceConfig {
    /// Navigation constant of the proportional navigation law.
    pub nav_constant: f64,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self { nav_constant: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyConfig {
    /// Minimum admissible separation between two effectors (m).
    pub r_s: f64,
    /// Activation range of the event trigger (m).
    pub r_crit: f64,
    /// Neighborhood radius (m).
    pub r_neigh: f64,
    /// Fraction of `r_crit` below which a predicted miss activates a constraint.
    pub eta: f64,
    /// Gain of the linear class-K function `alpha(s) = alpha_gain * s`.
    pub alpha_gain: f64,
    /// Fraction of the worst-case deceleration bound used as the RCBF constant.
    pub a_max_fraction: f64,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            r_s: 300.0,
            r_crit: 1500.0,
            r_neigh: 5000.0,
            eta: 0.5,
            alpha_gain: 1.0,
            a_max_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightConfig {
    pub w_0: f64,
    pub k_d: f64,
    pub k_t: f64,
    pub epsilon: f64,
    /// Diagonal of the deviation metric `W` in the filter objective.
    pub qp_weight_diag: Vec3,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            w_0: 1.0,
            k_d: 100.0,
            k_t: 100.0,
            epsilon: 1e-3,
            qp_weight_diag: Vec3::new(1.0, 1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Effector-target range counted as an interception (m).
    pub r_hit: f64,
    /// Effector-effector range counted as a collision (m).
    pub r_collision: f64,
    pub filter_enabled: bool,
    /// Default link assumption between effectors (cooperative when true).
    pub cooperative_links: bool,
    /// Effector pairs whose link is down regardless of `cooperative_links`.
    pub broken_links: Vec<[u32; 2]>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.005,
            t_end: 60.0,
            r_hit: 5.0,
            r_collision: 2.0,
            filter_enabled: true,
            cooperative_links: true,
            broken_links: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlackConfig {
    /// Quadratic slack regularization `rho`.
    pub regularization: f64,
}

impl Default for SlackConfig {
    fn default() -> Self {
        Self {
            regularization: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub guidance: GuidanceConfig,
    #[serde(default)]
    pub safety: SafetyConfig,
    #[serde(default)]
    pub weights: WeightConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub slack: SlackConfig,
    pub agents: Vec<AgentSpec>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Looks up a scenario shipped with the library by name.
    pub fn bundled(name: &str) -> Option<Self> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_toml_str(text).expect("bundled scenario parses"))
    }

    pub fn bundled_names() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(n, _)| *n)
    }

    pub fn agent(&self, id: u32) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn effectors(&self) -> impl Iterator<Item = &AgentSpec> {
        self.agents.iter().filter(|a| a.role == Role::Effector)
    }

    /// Conservative bound envelope over all effectors: the largest speed
    /// bound paired with the smallest acceleration bound.
    pub fn effector_envelope(&self) -> Option<PhysicalBounds> {
        self.effectors()
            .map(|a| a.bounds)
            .reduce(|acc, b| PhysicalBounds {
                v_max: acc.v_max.max(b.v_max),
                u_max: acc.u_max.min(b.u_max),
            })
    }

    /// Whether the link between effectors `i` and `j` is up.
    pub fn link_cooperative(&self, i: u32, j: u32) -> bool {
        let broken = self
            .sim
            .broken_links
            .iter()
            .any(|&[a, b]| (a == i && b == j) || (a == j && b == i));
        self.sim.cooperative_links && !broken
    }
}

/// Checks every scenario invariant and returns one message per violation.
///
/// An empty list means the scenario is admissible.
pub fn validate_scenario(cfg: &ScenarioConfig) -> Vec<String> {
    let mut v = Vec::new();
    let s = &cfg.safety;

    let positive = [
        ("guidance.nav_constant", cfg.guidance.nav_constant),
        ("safety.r_s", s.r_s),
        ("safety.r_crit", s.r_crit),
        ("safety.r_neigh", s.r_neigh),
        ("safety.alpha_gain", s.alpha_gain),
        ("weights.w_0", cfg.weights.w_0),
        ("weights.epsilon", cfg.weights.epsilon),
        ("weights.qp_weight_diag.x", cfg.weights.qp_weight_diag.x),
        ("weights.qp_weight_diag.y", cfg.weights.qp_weight_diag.y),
        ("weights.qp_weight_diag.z", cfg.weights.qp_weight_diag.z),
        ("sim.dt", cfg.sim.dt),
        ("sim.t_end", cfg.sim.t_end),
        ("sim.r_hit", cfg.sim.r_hit),
        ("sim.r_collision", cfg.sim.r_collision),
        ("slack.regularization", cfg.slack.regularization),
    ];
    for (key, value) in positive {
        if !(value.is_finite() && value > 0.0) {
            v.push(format!("{key} must be finite and > 0 (got {value})"));
        }
    }
    for (key, value) in [
        ("weights.k_d", cfg.weights.k_d),
        ("weights.k_t", cfg.weights.k_t),
    ] {
        if !(value.is_finite() && value >= 0.0) {
            v.push(format!("{key} must be finite and >= 0 (got {value})"));
        }
    }

    if !(s.eta > 0.0 && s.eta < 1.0) {
        v.push(format!("safety.eta must lie in (0, 1) (got {})", s.eta));
    }
    if !(s.r_s < s.eta * s.r_crit) {
        v.push(format!(
            "safety.r_s = {} must be below eta * r_crit = {}",
            s.r_s,
            s.eta * s.r_crit
        ));
    }
    if !(s.r_crit <= s.r_neigh) {
        v.push(format!(
            "safety.r_crit = {} must not exceed safety.r_neigh = {}",
            s.r_crit, s.r_neigh
        ));
    }
    if !(s.a_max_fraction > 0.0 && s.a_max_fraction <= 1.0) {
        v.push(format!(
            "safety.a_max_fraction must lie in (0, 1] (got {})",
            s.a_max_fraction
        ));
    }

    validate_agents(cfg, &mut v);
    v
}

fn validate_agents(cfg: &ScenarioConfig, v: &mut Vec<String>) {
    if cfg.agents.is_empty() {
        v.push("scenario has no agents".to_string());
        return;
    }

    let mut seen = BTreeSet::new();
    for a in &cfg.agents {
        if !seen.insert(a.id) {
            v.push(format!("duplicate agent id {}", a.id));
        }
    }
    let roles: BTreeMap<u32, Role> = cfg.agents.iter().map(|a| (a.id, a.role)).collect();

    for a in &cfg.agents {
        let id = a.id;
        if !(a.initial.position.is_finite() && a.initial.velocity.is_finite()) {
            v.push(format!("agent {id}: initial state must be finite"));
        }
        if !(a.bounds.v_max.is_finite() && a.bounds.v_max > 0.0) {
            v.push(format!("agent {id}: v_max must be finite and > 0"));
        }
        let speed = a.initial.velocity.norm();
        if speed > a.bounds.v_max * (1.0 + 1e-9) {
            v.push(format!(
                "agent {id}: initial speed {speed} exceeds v_max {}",
                a.bounds.v_max
            ));
        }
        match a.role {
            Role::Effector => {
                if !(a.bounds.u_max.is_finite() && a.bounds.u_max > 0.0) {
                    v.push(format!("agent {id}: effector u_max must be finite and > 0"));
                }
                match a.assigned_target {
                    None => v.push(format!("agent {id}: effector has no assigned target")),
                    Some(t) => match roles.get(&t) {
                        Some(Role::Target) => {}
                        Some(Role::Effector) => {
                            v.push(format!("agent {id}: assigned target {t} is an effector"))
                        }
                        None => v.push(format!("agent {id}: assigned target {t} does not exist")),
                    },
                }
                let (v_max, u_max) = (a.bounds.v_max, a.bounds.u_max);
                if u_max > 0.0 && !(cfg.safety.r_s > v_max * v_max / u_max) {
                    v.push(format!(
                        "agent {id}: r_s = {} must exceed v_max^2/u_max = {}",
                        cfg.safety.r_s,
                        v_max * v_max / u_max
                    ));
                }
            }
            Role::Target => {
                if a.bounds.u_max != 0.0 {
                    v.push(format!("agent {id}: target u_max must be 0"));
                }
                if a.assigned_target.is_some() {
                    v.push(format!("agent {id}: targets cannot carry an assignment"));
                }
            }
        }
    }

    let effectors: Vec<&AgentSpec> = cfg.effectors().collect();
    for (n, a) in effectors.iter().enumerate() {
        for b in &effectors[n + 1..] {
            let v_max = a.bounds.v_max.max(b.bounds.v_max);
            let u_max = a.bounds.u_max.min(b.bounds.u_max);
            if u_max > 0.0 && !(cfg.safety.r_s > v_max * v_max / u_max) {
                v.push(format!(
                    "effector pair ({}, {}): r_s = {} must exceed v_max^2/u_max = {}",
                    a.id,
                    b.id,
                    cfg.safety.r_s,
                    v_max * v_max / u_max
                ));
            }
        }
    }
}

/// Parses a scenario and rejects it unless [`validate_scenario`] is clean.
pub fn load_validated(text: &str) -> Result<ScenarioConfig> {
    let cfg = ScenarioConfig::from_toml_str(text)?;
    let violations = validate_scenario(&cfg);
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::InvalidScenario(violations))
    }
}
