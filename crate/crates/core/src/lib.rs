//! Decentralized, event-triggered robust control barrier function (RCBF)
//! safety filter for cooperative interceptor swarms.
//!
//! Each effector flies proportional navigation toward its assigned target.
//! Whenever a neighboring effector is close and on a converging course, the
//! effector solves a small slack-relaxed QP that minimally modifies its
//! nominal acceleration so the pairwise robust barrier condition holds.
//!
//! Module map:
//! - [`scenario`]: agent state, bounds, scenario files and validation
//! - [`guidance`]: proportional navigation
//! - [`geometry`]: relative state, zero-effort miss, event trigger
//! - [`barrier`]: barrier functions and constraint rows
//! - [`qp`]: active-set QP solver with KKT certification
//! - [`filter`]: per-agent filter step
//! - [`sim`]: fixed-step closed-loop simulation

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod error;
pub mod filter;
pub mod geometry;
pub mod guidance;
pub mod qp;
pub mod scenario;
pub mod sim;
mod vec3;

pub use barrier::{barrier_eval, constraint_row, rcbf_a_max, BarrierEval, SafetyConstraint};
pub use error::{Error, Result};
pub use filter::{criticality_weight, filter_step, FilterDiagnostics, PairDiagnostics};
pub use geometry::{neighbors, pair_geometry, trigger, AgentView, PairGeometry};
pub use guidance::{png_command, GuidanceCommand};
pub use qp::{solve, verify_kkt, QpProblem, QpRow, QpSolution};
pub use scenario::{
    validate_scenario, AgentSpec, AgentState, PhysicalBounds, Role, ScenarioConfig, GRAVITY,
};
pub use sim::{integrate_step, run, EventKind, SimEvent, TrajectoryLog};
pub use vec3::Vec3;
