//! Relative engagement geometry, zero-effort miss and the event trigger.

use crate::{AgentState, Role, Vec3};

/// Relative speeds below this (squared, (m/s)^2) count as co-moving.
pub const COMOVING_SPEED_SQ: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    /// `p_a - p_b` (m).
    pub r_ij: Vec3,
    /// `v_a - v_b` (m/s).
    pub v_ij: Vec3,
    pub range: f64,
    /// Time until closest approach under constant velocities (s). Negative
    /// when the pair is diverging.
    pub t_zem: f64,
    /// Predicted miss distance at `t_zem` (m).
    pub zem: f64,
}

pub fn pair_geometry(a: &AgentState, b: &AgentState) -> PairGeometry {
    let r_ij = a.position - b.position;
    let v_ij = a.velocity - b.velocity;
    let range = r_ij.norm();
    let v_sq = v_ij.norm_squared();
    let (t_zem, zem) = if v_sq < COMOVING_SPEED_SQ {
        (0.0, range)
    } else {
        let t = -r_ij.dot(v_ij) / v_sq;
        (t, (r_ij + v_ij * t).norm())
    };
    PairGeometry {
        r_ij,
        v_ij,
        range,
        t_zem,
        zem,
    }
}

/// A snapshot entry of one live agent, as seen by the filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentView {
    pub id: u32,
    pub role: Role,
    pub state: AgentState,
}

/// Ids of the effectors within the closed ball of radius `r_neigh` around
/// `self_id`, in snapshot order. Returns an empty list if `self_id` is absent.
pub fn neighbors(self_id: u32, all: &[AgentView], r_neigh: f64) -> Vec<u32> {
    let Some(me) = all.iter().find(|a| a.id == self_id) else {
        return Vec::new();
    };
    all.iter()
        .filter(|a| a.id != self_id && a.role == Role::Effector)
        .filter(|a| (me.state.position - a.state.position).norm() <= r_neigh)
        .map(|a| a.id)
        .collect()
}

/// Range gate, converging-motion gate and predicted-miss gate, all closed.
pub fn trigger(pair: &PairGeometry, r_crit: f64, eta: f64) -> bool {
    pair.range <= r_crit && pair.t_zem > 0.0 && pair.zem <= eta * r_crit
}
