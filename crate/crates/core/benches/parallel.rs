use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use aedes_core::classify::comparison_suite;
use aedes_core::coefficients::{CoefficientProfile, ProfileSpec};
use aedes_core::parallel::Strategy;
use aedes_core::solver::{DtPolicy, InitialData, Simulation, SolverConfig};
use aedes_core::steady::solve_global;
use aedes_core::threshold::{r0_batch, r0f_trace, Interval};

const STRATEGIES: [(&str, Strategy); 2] = [("sequential", Strategy::Sequential), ("parallel", Strategy::Parallel)];

fn patchy() -> CoefficientProfile {
    CoefficientProfile::new(
        ProfileSpec::bump(2.0, 1.0, 0.5, 1.0),
        ProfileSpec::constant(1.0),
        ProfileSpec::bump(0.2, -0.05, -1.0, 2.0),
        ProfileSpec::constant(0.5),
        1.0,
        0.1,
        1.0,
        1.0,
    )
    .unwrap()
}

fn solver(n: usize, mu: f64, horizon: f64) -> SolverConfig {
    SolverConfig {
        n,
        dt: DtPolicy::Fixed { dt: 0.01 },
        mu,
        horizon,
        output_interval: 0.1,
        ..SolverConfig::default()
    }
}

fn bench_r0_batch(c: &mut Criterion) {
    let p = patchy();
    let intervals: Vec<Interval> = (1..=64).map(|k| Interval::symmetric(0.25 * k as f64)).collect();
    let mut group = c.benchmark_group("r0_batch_64x512");
    for (name, s) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| r0_batch(black_box(&intervals), &p, 512, s).unwrap())
        });
    }
    group.finish();
}

fn bench_r0f_trace(c: &mut Criterion) {
    let p = patchy();
    let tr = Simulation::new(p.clone(), &InitialData::cosine(1.0, 0.5, 0.5), solver(128, 2.0, 5.0))
        .unwrap()
        .run()
        .unwrap();
    let fronts = tr.fronts();
    let mut group = c.benchmark_group("r0f_trace");
    for (name, s) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| r0f_trace(black_box(&fronts), &p, 256, s).unwrap())
        });
    }
    group.finish();
}

fn bench_comparison(c: &mut Criterion) {
    let p = patchy();
    let init = InitialData::cosine(1.0, 0.5, 0.5);
    let cfg = solver(64, 1.0, 1.0);
    let mut group = c.benchmark_group("comparison_suite");
    group.sample_size(10);
    for (name, s) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| comparison_suite(&p, &init, &cfg, black_box(&[0.5, 1.0, 2.0]), s).unwrap())
        });
    }
    group.finish();
}

fn bench_steady(c: &mut Criterion) {
    let p = patchy();
    let seq = [4.0, 8.0, 16.0];
    let mut group = c.benchmark_group("steady_global");
    group.sample_size(10);
    for (name, s) in STRATEGIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| solve_global(&p, 8.0, black_box(&seq), 2.0, s).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_r0_batch, bench_r0f_trace, bench_comparison, bench_steady);
criterion_main!(benches);
