//! Sequential against rayon execution for the embarrassingly parallel drivers.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ssp_dirk::make_optimal;
use ssp_dirk::par::Execution;
use ssp_dirk::search::{multi_start_with, radius_survey_with, SearchConfig};
use ssp_dirk::ssp::feasibility_profile_with;

fn schedules() -> Vec<(&'static str, Execution)> {
    let mut v = vec![("sequential", Execution::Sequential)];
    #[cfg(feature = "parallel")]
    v.push(("parallel", Execution::Parallel));
    v
}

fn radius_survey(c: &mut Criterion) {
    let mut group = c.benchmark_group("radius_survey");
    group.sample_size(10);
    for (name, exec) in schedules() {
        group.bench_function(BenchmarkId::new(name, "s=3 n=200"), |b| {
            b.iter(|| radius_survey_with(3, 200, 7, 1e-8, exec).unwrap())
        });
    }
    group.finish();
}

fn multi_start(c: &mut Criterion) {
    let cfg = SearchConfig {
        restarts: 4,
        max_iters: 1_000,
        ..SearchConfig::new(2)
    };
    let mut group = c.benchmark_group("multi_start");
    group.sample_size(10);
    for (name, exec) in schedules() {
        group.bench_function(BenchmarkId::new(name, "s=2 4x1000"), |b| {
            b.iter(|| multi_start_with(black_box(&cfg), exec).unwrap())
        });
    }
    group.finish();
}

fn feasibility_profile(c: &mut Criterion) {
    let method = make_optimal(6).unwrap().method;
    let grid: Vec<f64> = (0..2_000).map(|k| k as f64 * 0.01).collect();
    let mut group = c.benchmark_group("feasibility_profile");
    for (name, exec) in schedules() {
        group.bench_function(BenchmarkId::new(name, "s=6 n=2000"), |b| {
            b.iter(|| feasibility_profile_with(black_box(&method), &grid, exec))
        });
    }
    group.finish();
}

criterion_group!(benches, radius_survey, multi_start, feasibility_profile);
criterion_main!(benches);
