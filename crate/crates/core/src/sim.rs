//! Deterministic fixed-step closed-loop simulation.
//!
//! Every step takes one snapshot of all live agents, computes every control
//! from it, and only then advances all agents (synchronous update). Agents
//! that intercept or collide are deactivated and their last state is kept in
//! the log.

use std::fmt;

use crate::error::{Error, Result};
use crate::filter::filter_step;
use crate::geometry::AgentView;
use crate::guidance::png_command;
use crate::scenario::{validate_scenario, AgentState, Role, ScenarioConfig};
use crate::Vec3;

/// Sub-samples per step used to catch close passes between step ends.
pub const ARC_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Collision,
    Interception,
    Saturation,
    FilterActivation,
    FilterDeactivation,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Interception => "interception",
            EventKind::Collision => "collision",
            EventKind::Saturation => "saturation",
            EventKind::FilterActivation => "filter_activation",
            EventKind::FilterDeactivation => "filter_deactivation",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    pub agents: Vec<u32>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRecord {
    pub id: u32,
    pub role: Role,
    pub alive: bool,
    pub position: Vec3,
    pub velocity: Vec3,
    pub nominal: Vec3,
    pub applied: Vec3,
    /// Neighbors whose trigger fired.
    pub triggered: usize,
    pub n_active_constraints: usize,
    pub slack_total: f64,
    pub saturated: bool,
    /// The filter changed the nominal command.
    pub intervened: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    pub time: f64,
    /// One entry per agent, in ascending id order.
    pub agents: Vec<AgentRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub interceptions: usize,
    pub collisions: usize,
    /// Smallest separation between two live effectors, sampled along every
    /// step (m). Infinite with fewer than two effectors.
    pub min_effector_separation: f64,
    pub first_collision_time: Option<f64>,
    pub filter_activations: usize,
    pub total_slack: f64,
    pub end_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub records: Vec<StepRecord>,
    pub events: Vec<SimEvent>,
    pub outcome: Outcome,
}

impl TrajectoryLog {
    /// Records of one agent in time order.
    pub fn agent_records(&self, id: u32) -> impl Iterator<Item = (f64, &AgentRecord)> + '_ {
        self.records
            .iter()
            .filter_map(move |r| r.agents.iter().find(|a| a.id == id).map(|a| (r.time, a)))
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &SimEvent> + '_ {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

/// Exact constant-acceleration update of a double integrator, followed by a
/// radial clamp of the speed to `v_max`.
pub fn integrate_step(state: &AgentState, accel: Vec3, dt: f64, v_max: f64) -> AgentState {
    let position = state.position + state.velocity * dt + accel * (0.5 * dt * dt);
    let (velocity, _) = (state.velocity + accel * dt).clamp_norm(v_max);
    AgentState { position, velocity }
}

fn arc_point(state: &AgentState, accel: Vec3, tau: f64) -> Vec3 {
    state.position + state.velocity * tau + accel * (0.5 * tau * tau)
}

/// Runs a validated scenario.
pub fn run(cfg: &ScenarioConfig) -> Result<TrajectoryLog> {
    let violations = validate_scenario(cfg);
    if !violations.is_empty() {
        return Err(Error::InvalidScenario(violations));
    }
    run_unvalidated(cfg)
}

/// Runs a scenario without checking its invariants first. Meant for
/// experiments that deliberately leave the admissible parameter range.
pub fn run_unvalidated(cfg: &ScenarioConfig) -> Result<TrajectoryLog> {
    Engine::new(cfg).run()
}

struct Engine<'a> {
    cfg: &'a ScenarioConfig,
    /// Indices into `cfg.agents`, sorted by id.
    order: Vec<usize>,
    states: Vec<AgentState>,
    alive: Vec<bool>,
    intervening: Vec<bool>,
    saturating: Vec<bool>,
    records: Vec<StepRecord>,
    events: Vec<SimEvent>,
    min_sep: f64,
    total_slack: f64,
}

#[derive(Clone, Copy)]
struct Control {
    nominal: Vec3,
    applied: Vec3,
    triggered: usize,
    constraints: usize,
    slack: f64,
    saturated: bool,
    intervened: bool,
}

const IDLE: Control = Control {
    nominal: Vec3::ZERO,
    applied: Vec3::ZERO,
    triggered: 0,
    constraints: 0,
    slack: 0.0,
    saturated: false,
    intervened: false,
};

impl<'a> Engine<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        let mut order: Vec<usize> = (0..cfg.agents.len()).collect();
        order.sort_by_key(|&i| cfg.agents[i].id);
        let states = order.iter().map(|&i| cfg.agents[i].initial).collect();
        let n = order.len();
        Self {
            cfg,
            order,
            states,
            alive: vec![true; n],
            intervening: vec![false; n],
            saturating: vec![false; n],
            records: Vec::new(),
            events: Vec::new(),
            min_sep: f64::INFINITY,
            total_slack: 0.0,
        }
    }

    fn spec(&self, k: usize) -> &'a crate::AgentSpec {
        &self.cfg.agents[self.order[k]]
    }

    fn index_of(&self, id: u32) -> Option<usize> {
        self.order.iter().position(|&i| self.cfg.agents[i].id == id)
    }

    fn live(&self, role: Role) -> impl Iterator<Item = usize> + '_ {
        (0..self.order.len()).filter(move |&k| self.alive[k] && self.spec(k).role == role)
    }

    fn run(mut self) -> Result<TrajectoryLog> {
        let sim = &self.cfg.sim;
        let dt = sim.dt;
        let max_steps = (sim.t_end / dt - 1e-9).ceil().max(0.0) as u64;

        let mut step = 0u64;
        while step < max_steps
            && self.live(Role::Target).next().is_some()
            && self.live(Role::Effector).next().is_some()
        {
            let t = step as f64 * dt;
            let controls = self.controls()?;
            self.log_transitions(t, &controls);
            self.record(step, t, &controls);

            let before = self.states.clone();
            for k in 0..self.states.len() {
                if self.alive[k] {
                    let v_max = self.spec(k).bounds.v_max;
                    self.states[k] = integrate_step(&before[k], controls[k].applied, dt, v_max);
                }
            }
            self.detect(t, &before, &controls);
            step += 1;
        }

        let t_final = step as f64 * dt;
        self.record(step, t_final, &vec![IDLE; self.states.len()]);

        let count = |kind| self.events.iter().filter(|e| e.kind == kind).count();
        let outcome = Outcome {
            interceptions: count(EventKind::Interception),
            collisions: count(EventKind::Collision),
            min_effector_separation: self.min_sep,
            first_collision_time: self
                .events
                .iter()
                .find(|e| e.kind == EventKind::Collision)
                .map(|e| e.time),
            filter_activations: count(EventKind::FilterActivation),
            total_slack: self.total_slack,
            end_time: t_final,
        };
        Ok(TrajectoryLog {
            records: self.records,
            events: self.events,
            outcome,
        })
    }

    fn controls(&mut self) -> Result<Vec<Control>> {
        let cfg = self.cfg;
        let snapshot: Vec<AgentView> = (0..self.states.len())
            .filter(|&k| self.alive[k])
            .map(|k| AgentView {
                id: self.spec(k).id,
                role: self.spec(k).role,
                state: self.states[k],
            })
            .collect();

        let mut out = vec![IDLE; self.states.len()];
        for k in self.live(Role::Effector).collect::<Vec<_>>() {
            let spec = self.spec(k);
            let target = spec
                .assigned_target
                .and_then(|id| self.index_of(id))
                .filter(|&j| self.alive[j]);
            let nominal = match target {
                Some(j) => {
                    png_command(&self.states[k], &self.states[j], cfg.guidance.nav_constant)?.accel
                }
                None => Vec3::ZERO,
            };
            let c = if cfg.sim.filter_enabled {
                let (applied, diag) = filter_step(spec.id, &snapshot, nominal, cfg, |j| {
                    cfg.link_cooperative(spec.id, j)
                })?;
                Control {
                    nominal,
                    applied,
                    triggered: diag.active_neighbor_ids.len(),
                    constraints: diag.constraints_built,
                    slack: diag.slack_total,
                    saturated: diag.saturated,
                    intervened: diag.intervened,
                }
            } else {
                let (applied, saturated) = nominal.clamp_norm(spec.bounds.u_max);
                Control {
                    nominal,
                    applied,
                    saturated,
                    ..IDLE
                }
            };
            self.total_slack += c.slack;
            out[k] = c;
        }
        Ok(out)
    }

    fn log_transitions(&mut self, t: f64, controls: &[Control]) {
        for (k, c) in controls.iter().enumerate() {
            if !self.alive[k] || self.spec(k).role != Role::Effector {
                continue;
            }
            let id = self.spec(k).id;
            if c.intervened != self.intervening[k] {
                let (kind, detail) = if c.intervened {
                    (
                        EventKind::FilterActivation,
                        format!("{} active constraint(s)", c.constraints),
                    )
                } else {
                    (EventKind::FilterDeactivation, String::new())
                };
                self.events.push(SimEvent {
                    time: t,
                    kind,
                    agents: vec![id],
                    detail,
                });
                self.intervening[k] = c.intervened;
            }
            if c.saturated && !self.saturating[k] {
                self.events.push(SimEvent {
                    time: t,
                    kind: EventKind::Saturation,
                    agents: vec![id],
                    detail: format!("commanded {:.3} m/s^2", c.nominal.norm()),
                });
            }
            self.saturating[k] = c.saturated;
        }
    }

    fn record(&mut self, step: u64, time: f64, controls: &[Control]) {
        let agents = (0..self.states.len())
            .map(|k| {
                let spec = self.spec(k);
                let c = &controls[k];
                AgentRecord {
                    id: spec.id,
                    role: spec.role,
                    alive: self.alive[k],
                    position: self.states[k].position,
                    velocity: self.states[k].velocity,
                    nominal: c.nominal,
                    applied: c.applied,
                    triggered: c.triggered,
                    n_active_constraints: c.constraints,
                    slack_total: c.slack,
                    saturated: c.saturated,
                    intervened: c.intervened,
                }
            })
            .collect();
        self.records.push(StepRecord { step, time, agents });
    }

    /// Samples the separation of two agents along one step. Returns the
    /// smallest sampled distance and the first step fraction at which the
    /// distance drops below `radius`, if any.
    fn sample_step(
        &self,
        before: &[AgentState],
        controls: &[Control],
        (a, b): (usize, usize),
        radius: f64,
    ) -> (f64, Option<f64>) {
        let dt = self.cfg.sim.dt;
        let mut min = (before[a].position - before[b].position).norm();
        let mut first = None;
        for s in 1..=ARC_SAMPLES {
            let frac = s as f64 / ARC_SAMPLES as f64;
            let tau = frac * dt;
            let d = (arc_point(&before[a], controls[a].applied, tau)
                - arc_point(&before[b], controls[b].applied, tau))
            .norm();
            min = min.min(d);
            if d < radius && first.is_none() {
                first = Some(frac);
            }
        }
        let end = (self.states[a].position - self.states[b].position).norm();
        min = min.min(end);
        if end < radius && first.is_none() {
            first = Some(1.0);
        }
        (min, first)
    }

    fn detect(&mut self, t: f64, before: &[AgentState], controls: &[Control]) {
        let sim = &self.cfg.sim;
        let dt = sim.dt;
        let effectors: Vec<usize> = self.live(Role::Effector).collect();
        let targets: Vec<usize> = self.live(Role::Target).collect();

        // (time, kind, a, b, distance)
        let mut hits: Vec<(f64, EventKind, usize, usize, f64)> = Vec::new();
        for (n, &a) in effectors.iter().enumerate() {
            for &b in &effectors[n + 1..] {
                let (d, first) = self.sample_step(before, controls, (a, b), sim.r_collision);
                self.min_sep = self.min_sep.min(d);
                if let Some(frac) = first {
                    hits.push((t + frac * dt, EventKind::Collision, a, b, d));
                }
            }
            for &b in &targets {
                let (d, first) = self.sample_step(before, controls, (a, b), sim.r_hit);
                if let Some(frac) = first {
                    hits.push((t + frac * dt, EventKind::Interception, a, b, d));
                }
            }
        }
        hits.sort_by(|x, y| {
            x.0.total_cmp(&y.0)
                .then(x.1.cmp(&y.1))
                .then(x.2.cmp(&y.2))
                .then(x.3.cmp(&y.3))
        });

        for (time, kind, a, b, d) in hits {
            if !(self.alive[a] && self.alive[b]) {
                continue;
            }
            self.alive[a] = false;
            self.alive[b] = false;
            let (ia, ib) = (self.spec(a).id, self.spec(b).id);
            let detail = match kind {
                EventKind::Collision => format!("effectors {ia} and {ib} within {d:.3} m"),
                _ => format!("effector {ia} reached target {ib} at {d:.3} m"),
            };
            self.events.push(SimEvent {
                time,
                kind,
                agents: vec![ia, ib],
                detail,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{AgentSpec, PhysicalBounds};

    #[test]
    fn ballistic_step() {
        let s = AgentState::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(10.0, 0.0, -5.0));
        let n = integrate_step(&s, Vec3::ZERO, 0.1, 100.0);
        assert_eq!(n.position, Vec3::new(2.0, 2.0, 2.5));
        assert_eq!(n.velocity, s.velocity);
    }

    #[test]
    fn constant_acceleration_step() {
        let s = AgentState::new(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0));
        let n = integrate_step(&s, Vec3::new(0.0, 1.0, 0.0), 1.0, 10.0);
        assert_eq!(n.position, Vec3::new(1.0, 0.5, 0.0));
        assert_eq!(n.velocity, Vec3::new(1.0, 1.0, 0.0));
    }

    #[test]
    fn speed_clamp_is_radial() {
        let s = AgentState::new(Vec3::ZERO, Vec3::new(300.0, 100.0, 0.0));
        let n = integrate_step(&s, Vec3::ZERO, 0.01, 306.0);
        let scale = 306.0 / 100000.0f64.sqrt();
        assert!((n.velocity.norm() - 306.0).abs() < 1e-9);
        assert!((n.velocity.x - 300.0 * scale).abs() < 1e-9);
        assert!((n.velocity.y - 100.0 * scale).abs() < 1e-9);
    }

    fn one_on_one() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::bundled("threeVthree").unwrap();
        cfg.agents = vec![
            AgentSpec {
                id: 1,
                role: Role::Effector,
                assigned_target: Some(2),
                initial: AgentState::new(Vec3::ZERO, Vec3::new(300.0, 0.0, 0.0)),
                bounds: PhysicalBounds {
                    v_max: 306.0,
                    u_max: 392.4,
                },
            },
            AgentSpec {
                id: 2,
                role: Role::Target,
                assigned_target: None,
                initial: AgentState::new(Vec3::new(10000.0, 0.0, 0.0), Vec3::new(-200.0, 0.0, 0.0)),
                bounds: PhysicalBounds {
                    v_max: 200.0,
                    u_max: 0.0,
                },
            },
        ];
        cfg
    }

    #[test]
    fn rectilinear_interception() {
        let cfg = one_on_one();
        let log = run(&cfg).unwrap();
        assert_eq!(log.outcome.interceptions, 1);
        let hit = log.events_of(EventKind::Interception).next().unwrap();
        // closes 10 km at 500 m/s, counted once within r_hit = 5 m
        let expected = (10000.0 - cfg.sim.r_hit) / 500.0;
        assert!(
            (hit.time - expected).abs() <= cfg.sim.dt,
            "{} vs {expected}",
            hit.time
        );
        for (_, r) in log.agent_records(1) {
            assert_eq!(r.applied.y, 0.0);
            assert_eq!(r.applied.z, 0.0);
        }
    }

    #[test]
    fn record_times_are_step_multiples() {
        let mut cfg = one_on_one();
        cfg.sim.t_end = 0.1;
        let log = run(&cfg).unwrap();
        assert_eq!(log.records.len(), 21);
        for (k, r) in log.records.iter().enumerate() {
            assert_eq!(r.time, k as f64 * cfg.sim.dt);
        }
    }

    #[test]
    fn invalid_scenario_is_rejected() {
        let mut cfg = one_on_one();
        cfg.safety.r_s = 100.0;
        assert!(matches!(run(&cfg), Err(Error::InvalidScenario(_))));
    }
}
