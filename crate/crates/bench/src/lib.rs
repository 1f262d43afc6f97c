//! Benchmark fixtures.

use std::f64::consts::PI;

use rcbf_swarm::{
    AgentSpec, AgentState, AgentView, PhysicalBounds, QpProblem, QpRow, Role, ScenarioConfig, Vec3,
};

const BOUNDS: PhysicalBounds = PhysicalBounds {
    v_max: 306.0,
    u_max: 392.4,
};

/// `n` effectors on a horizontal circle of radius `radius`, all flying
/// toward the center at 250 m/s, so every pair is on a collision course.
pub fn converging_ring(n: u32, radius: f64) -> (ScenarioConfig, Vec<AgentView>) {
    let mut cfg = ScenarioConfig::bundled("threeVthree").expect("bundled scenario");
    cfg.name = format!("ring{n}");
    cfg.agents.clear();
    let mut views = Vec::new();
    for k in 0..n {
        let theta = 2.0 * PI * k as f64 / n as f64;
        let dir = Vec3::new(theta.cos(), theta.sin(), 0.0);
        let state = AgentState::new(dir * radius, dir * -250.0);
        cfg.agents.push(AgentSpec {
            id: k + 1,
            role: Role::Effector,
            assigned_target: None,
            initial: state,
            bounds: BOUNDS,
        });
        views.push(AgentView {
            id: k + 1,
            role: Role::Effector,
            state,
        });
    }
    (cfg, views)
}

/// Relaxed QP with `m` rows whose normals are spread over the sphere and
/// which all cut off the nominal command.
pub fn spread_problem(m: usize) -> QpProblem {
    let golden = PI * (3.0 - 5f64.sqrt());
    let rows = (0..m)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            let c = Vec3::new(r * phi.cos(), r * phi.sin(), z);
            QpRow::soft(c, -1.0 - 0.1 * (k % 5) as f64, 1.0 + k as f64)
        })
        .collect();
    QpProblem::new(Vec3::new(3.0, -2.0, 1.0)).with_rows(rows)
}

/// The bundled scenario with the filter switched on or off.
pub fn table_one(filter: bool) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::bundled("threeVthree").expect("bundled scenario");
    cfg.sim.filter_enabled = filter;
    cfg
}
