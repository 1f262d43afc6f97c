#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::rngs::StdRng;
use rand::Rng;
use rcbf_swarm::{
    barrier_eval, pair_geometry, rcbf_a_max, AgentSpec, AgentState, PhysicalBounds, QpProblem,
    QpRow, Role, ScenarioConfig, Vec3,
};

pub const EFFECTOR_BOUNDS: PhysicalBounds = PhysicalBounds {
    v_max: 306.0,
    u_max: 392.4,
};

pub fn unit_vector(rng: &mut StdRng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v * (1.0 / n);
        }
    }
}

pub fn random_vec(rng: &mut StdRng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

/// Two effectors whose straight-line paths cross near a common point a few
/// seconds ahead, each flying toward a stationary target beyond the crossing.
/// Both start with `h <= 0` and `H <= 0`.
pub fn crossing_encounter(rng: &mut StdRng, t_end: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::bundled("threeVthree").expect("bundled scenario");
    let a_max = rcbf_a_max(cfg.safety.r_s, EFFECTOR_BOUNDS, cfg.safety.a_max_fraction).unwrap();
    let states = loop {
        let crossing = unit_vector(rng) * rng.random_range(0.0..2000.0);
        let t_cross = rng.random_range(2.0..8.0);
        let mut states = Vec::new();
        for k in 0..2 {
            let v = unit_vector(rng) * rng.random_range(250.0..306.0);
            let t = t_cross
                + if k == 1 {
                    rng.random_range(-0.5..0.5)
                } else {
                    0.0
                };
            let p = crossing - v * t + unit_vector(rng) * rng.random_range(0.0..50.0);
            states.push((AgentState::new(p, v), crossing));
        }
        let eval = barrier_eval(
            &pair_geometry(&states[0].0, &states[1].0),
            cfg.safety.r_s,
            a_max,
        );
        if eval.h <= 0.0 && eval.big_h <= 0.0 {
            break states;
        }
    };
    cfg.name = "crossing".into();
    cfg.sim.t_end = t_end;
    cfg.agents.clear();
    for (k, (state, crossing)) in states.iter().enumerate() {
        let k = k as u32;
        cfg.agents.push(AgentSpec {
            id: k + 1,
            role: Role::Effector,
            assigned_target: Some(k + 3),
            initial: *state,
            bounds: EFFECTOR_BOUNDS,
        });
        cfg.agents.push(AgentSpec {
            id: k + 3,
            role: Role::Target,
            assigned_target: None,
            initial: AgentState::new(*crossing + state.velocity * 30.0, Vec3::default()),
            bounds: PhysicalBounds {
                v_max: 1.0,
                u_max: 0.0,
            },
        });
    }
    cfg.agents.sort_by_key(|a| a.id);
    cfg
}

pub fn random_spd(rng: &mut StdRng) -> Matrix3<f64> {
    let l = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    l * l.transpose() + Matrix3::identity() * 0.1
}

/// Random problem with up to `max_rows` rows, a mix of hard and relaxable.
pub fn random_problem(rng: &mut StdRng, max_rows: usize) -> QpProblem {
    let m = rng.random_range(0..=max_rows);
    let rows = (0..m)
        .map(|_| {
            let coeff = random_vec(rng, 2.0);
            let rhs = rng.random_range(-3.0..3.0);
            if rng.random_bool(0.75) {
                QpRow::soft(coeff, rhs, rng.random_range(0.1..20.0))
            } else {
                QpRow::hard(coeff, rhs)
            }
        })
        .collect();
    let mut p = QpProblem::new(random_vec(rng, 5.0)).with_rows(rows);
    p.weight_matrix = random_spd(rng);
    p
}

/// Exhaustive reference solver for small problems.
///
/// Eliminating the slacks leaves `f(a) = (a-n)'W(a-n) + sum phi_k(c_k'a - b_k)`
/// with `phi(t) = w t + rho t^2` for `t > 0` and zero otherwise (hard rows
/// instead require `t <= 0`). Every row is either below, at, or above its
/// kink; each of the `3^m` patterns gives a linear system, and the cheapest
/// pattern whose solution is consistent is the optimum. Returns `None` when
/// the hard rows are infeasible.
pub fn oracle(problem: &QpProblem) -> Option<(f64, Vec3)> {
    let m = problem.rows.len();
    let rho = problem.slack_reg;
    let n = na(problem.nominal);
    let w = problem.weight_matrix;
    let mut best: Option<(f64, Vec3)> = None;
    for code in 0..3usize.pow(m as u32) {
        let mut pattern = Vec::with_capacity(m);
        let mut c = code;
        for _ in 0..m {
            pattern.push(c % 3);
            c /= 3;
        }
        if pattern
            .iter()
            .zip(&problem.rows)
            .any(|(&s, r)| s == 2 && !r.relaxable)
        {
            continue;
        }
        let kinks: Vec<usize> = (0..m).filter(|&k| pattern[k] == 1).collect();
        let dim = 3 + kinks.len();
        let mut mat = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        let mut h = w * 2.0;
        let mut g = w * n * 2.0;
        for (k, row) in problem.rows.iter().enumerate() {
            if pattern[k] == 2 {
                let ck = na(row.coeff);
                h += ck * ck.transpose() * (2.0 * rho);
                g -= ck * (row.slack_weight - 2.0 * rho * row.rhs);
            }
        }
        mat.view_mut((0, 0), (3, 3)).copy_from(&h);
        rhs.rows_mut(0, 3).copy_from(&g);
        for (j, &k) in kinks.iter().enumerate() {
            let ck = na(problem.rows[k].coeff);
            for i in 0..3 {
                mat[(i, 3 + j)] = ck[i];
                mat[(3 + j, i)] = ck[i];
            }
            rhs[3 + j] = problem.rows[k].rhs;
        }
        let Some(sol) = mat.full_piv_lu().solve(&rhs) else {
            continue;
        };
        let a = Vec3::new(sol[0], sol[1], sol[2]);
        let mut consistent = true;
        for (k, row) in problem.rows.iter().enumerate() {
            let t = row.coeff.dot(a) - row.rhs;
            let tol = 1e-9 * (1.0 + row.rhs.abs() + row.coeff.norm() * a.norm());
            consistent &= match pattern[k] {
                0 => t <= tol,
                2 => t >= -tol,
                _ => true,
            };
        }
        for (j, &k) in kinks.iter().enumerate() {
            let lambda = sol[3 + j];
            consistent &= lambda >= -1e-9;
            if problem.rows[k].relaxable {
                consistent &= lambda <= problem.rows[k].slack_weight + 1e-9;
            }
        }
        if !consistent {
            continue;
        }
        let slacks: Vec<f64> = problem
            .rows
            .iter()
            .map(|r| {
                if r.relaxable {
                    (r.coeff.dot(a) - r.rhs).max(0.0)
                } else {
                    0.0
                }
            })
            .collect();
        let f = problem.objective(a, &slacks);
        if best.is_none_or(|(bf, _)| f < bf) {
            best = Some((f, a));
        }
    }
    best
}

fn na(v: Vec3) -> nalgebra::Vector3<f64> {
    nalgebra::Vector3::new(v.x, v.y, v.z)
}
