//! Per-agent safety filter step.

use crate::barrier::{barrier_eval, constraint_row, rcbf_a_max, SafetyConstraint};
use crate::error::{Error, Result};
use crate::geometry::{neighbors, pair_geometry, trigger, AgentView, PairGeometry};
use crate::qp::{solve, QpProblem, QpRow};
use crate::{ScenarioConfig, Vec3};

/// State-dependent slack price of one pair:
/// `w_0 + k_d / (eps + range) + k_t / (eps + max(0, t_zem))`.
pub fn criticality_weight(pair: &PairGeometry, w_0: f64, k_d: f64, k_t: f64, eps: f64) -> f64 {
    w_0 + k_d / (eps + pair.range) + k_t / (eps + pair.t_zem.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairDiagnostics {
    pub neighbor_id: u32,
    pub h: f64,
    pub big_h: f64,
    pub zem: f64,
    pub t_zem: f64,
    pub weight: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterDiagnostics {
    /// Neighbors whose event trigger fired this step.
    pub active_neighbor_ids: Vec<u32>,
    pub constraints_built: usize,
    pub slack_total: f64,
    /// Output was radially rescaled to the acceleration bound.
    pub saturated: bool,
    /// The QP moved the command away from the nominal.
    pub intervened: bool,
    pub qp_objective: f64,
    pub per_pair: Vec<PairDiagnostics>,
}

/// Computes the filtered acceleration of effector `self_id`.
///
/// `states` is the step-start snapshot of all live agents. `link_up(j)`
/// reports whether the link to neighbor `j` is available; a linked neighbor
/// is assumed to mirror the maneuver, an unlinked one to hold its velocity.
pub fn filter_step(
    self_id: u32,
    states: &[AgentView],
    nominal: Vec3,
    cfg: &ScenarioConfig,
    link_up: impl Fn(u32) -> bool,
) -> Result<(Vec3, FilterDiagnostics)> {
    let me = states
        .iter()
        .find(|a| a.id == self_id)
        .ok_or(Error::UnknownAgent(self_id))?;
    let spec = cfg.agent(self_id).ok_or(Error::UnknownAgent(self_id))?;
    let u_max = spec.bounds.u_max;
    let safety = &cfg.safety;
    let weights = &cfg.weights;

    let mut diag = FilterDiagnostics::default();
    let mut rows: Vec<SafetyConstraint> = Vec::new();
    let mut a_max = None;

    for j in neighbors(self_id, states, safety.r_neigh) {
        let other = states
            .iter()
            .find(|a| a.id == j)
            .expect("neighbor is in snapshot");
        let pair = pair_geometry(&me.state, &other.state);
        if !trigger(&pair, safety.r_crit, safety.eta) {
            continue;
        }
        diag.active_neighbor_ids.push(j);
        let a_max = match a_max {
            Some(a) => a,
            None => {
                let bounds = cfg.effector_envelope().expect("caller is an effector");
                let a = rcbf_a_max(safety.r_s, bounds, safety.a_max_fraction)?;
                a_max = Some(a);
                a
            }
        };
        let eval = barrier_eval(&pair, safety.r_s, a_max);
        let weight = criticality_weight(
            &pair,
            weights.w_0,
            weights.k_d,
            weights.k_t,
            weights.epsilon,
        );
        if let Some(row) = constraint_row(j, &pair, &eval, safety.alpha_gain, link_up(j), weight) {
            diag.per_pair.push(PairDiagnostics {
                neighbor_id: j,
                h: eval.h,
                big_h: eval.big_h,
                zem: pair.zem,
                t_zem: pair.t_zem,
                weight,
                slack: 0.0,
            });
            rows.push(row);
        }
    }
    diag.constraints_built = rows.len();

    let mut accel = nominal;
    if !rows.is_empty() {
        let problem = QpProblem::new(nominal)
            .with_weight_diag(weights.qp_weight_diag)
            .with_slack_reg(cfg.slack.regularization)
            .with_rows(
                rows.iter()
                    .map(|r| QpRow::soft(r.coeff, r.rhs, r.weight))
                    .collect(),
            );
        let sol = solve(&problem)?;
        for (p, s) in diag.per_pair.iter_mut().zip(&sol.slacks) {
            p.slack = *s;
        }
        diag.slack_total = sol.slack_total();
        diag.qp_objective = sol.objective;
        diag.intervened = sol.accel != nominal;
        accel = sol.accel;
    }

    let (accel, saturated) = accel.clamp_norm(u_max);
    diag.saturated = saturated;
    Ok((accel, diag))
}
