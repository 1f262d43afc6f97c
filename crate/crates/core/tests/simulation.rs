mod common;

use rand::rngs::StdRng;
use rand::SeedableRng;
use rcbf_swarm::sim::run_unvalidated;
use rcbf_swarm::{run, EventKind, ScenarioConfig, TrajectoryLog};

fn table_one(filter: bool) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::bundled("threeVthree").unwrap();
    cfg.sim.filter_enabled = filter;
    cfg
}

fn assert_within_bounds(cfg: &ScenarioConfig, log: &TrajectoryLog) {
    for rec in &log.records {
        for a in &rec.agents {
            let bounds = cfg.agent(a.id).unwrap().bounds;
            assert!(
                a.applied.norm() <= bounds.u_max + 1e-9,
                "agent {} at t={}",
                a.id,
                rec.time
            );
            assert!(
                a.velocity.norm() <= bounds.v_max + 1e-9,
                "agent {} at t={}",
                a.id,
                rec.time
            );
        }
    }
}

#[test]
fn runs_are_deterministic() {
    for filter in [false, true] {
        let cfg = table_one(filter);
        assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
    }
    let cfg = common::crossing_encounter(&mut StdRng::seed_from_u64(3), 15.0);
    assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
}

#[test]
fn logged_states_respect_physical_bounds() {
    for filter in [false, true] {
        let cfg = table_one(filter);
        assert_within_bounds(&cfg, &run(&cfg).unwrap());
    }
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..5 {
        let cfg = common::crossing_encounter(&mut rng, 15.0);
        assert_within_bounds(&cfg, &run(&cfg).unwrap());
    }
}

#[test]
fn filter_that_never_triggers_changes_nothing() {
    let mut silent = table_one(true);
    silent.safety.r_crit = 0.0;
    let filtered = run_unvalidated(&silent).unwrap();
    let baseline = run(&table_one(false)).unwrap();
    assert_eq!(filtered.records, baseline.records);
    assert_eq!(filtered.events, baseline.events);
}

#[test]
fn records_fall_on_the_step_grid() {
    let cfg = table_one(true);
    let log = run(&cfg).unwrap();
    for (k, rec) in log.records.iter().enumerate() {
        assert_eq!(rec.step, k as u64);
        assert_eq!(rec.time, k as f64 * cfg.sim.dt);
    }
    let times: Vec<f64> = log.events.iter().map(|e| e.time).collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn table_one_outcomes() {
    let baseline = run(&table_one(false)).unwrap();
    let collision = baseline
        .events_of(EventKind::Collision)
        .next()
        .expect("collision");
    assert_eq!(collision.agents, [1, 2]);

    let filtered = run(&table_one(true)).unwrap();
    assert_eq!(filtered.outcome.collisions, 0);
    assert_eq!(filtered.outcome.interceptions, 3);
    let mut hit: Vec<Vec<u32>> = filtered
        .events_of(EventKind::Interception)
        .map(|e| e.agents.clone())
        .collect();
    hit.sort();
    assert_eq!(hit, [[1, 4], [2, 5], [3, 6]]);
}
