use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rcbf_swarm::{filter_step, run, solve, Vec3};
use rcbf_swarm_bench::{converging_ring, spread_problem, table_one};

fn qp(c: &mut Criterion) {
    let mut group = c.benchmark_group("qp_solve");
    for m in [1, 4, 16, 64] {
        let problem = spread_problem(m);
        group.bench_with_input(BenchmarkId::from_parameter(m), &problem, |b, p| {
            b.iter(|| solve(black_box(p)).unwrap())
        });
    }
    group.finish();
}

fn filter(c: &mut Criterion) {
    let mut group = c.benchmark_group("filter_step");
    for n in [2, 4, 8, 16] {
        let (cfg, views) = converging_ring(n, 1000.0);
        let nominal = Vec3::new(5.0, -3.0, 0.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &views, |b, v| {
            b.iter(|| filter_step(1, black_box(v), nominal, &cfg, |_| true).unwrap())
        });
    }
    group.finish();
}

fn simulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_table_one");
    group.sample_size(20);
    for (name, filter) in [("baseline", false), ("filtered", true)] {
        let cfg = table_one(filter);
        group.bench_function(name, |b| b.iter(|| run(black_box(&cfg)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, qp, filter, simulation);
criterion_main!(benches);
