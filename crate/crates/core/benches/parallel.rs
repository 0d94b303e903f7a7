use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hcl_core::bellman::verify::{brute_force_extremum, verify_bellman, Problem, VerificationGrid, VerifyOptions};
use hcl_core::centroaffine::CubicBound;
use hcl_core::control::random::fuzz_bounded;
use hcl_core::par::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn certification(c: &mut Criterion) {
    let bound = CubicBound::from_gamma(0.5).unwrap();
    let grid = VerificationGrid::interior(&bound, 32, 10, 9).unwrap();
    let mut g = c.benchmark_group("verify_bellman");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = VerifyOptions { exec, ..VerifyOptions::default() };
        g.bench_function(BenchmarkId::new("bounded-max", name), |b| {
            b.iter(|| verify_bellman(Problem::BoundedMax, black_box(&bound), &grid, &opts).unwrap())
        });
    }
    g.finish();
}

fn fuzzing(c: &mut Criterion) {
    let bound = CubicBound::from_gamma(0.5).unwrap();
    let mut g = c.benchmark_group("fuzz_bounded");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("100 profiles", name), |b| {
            b.iter(|| fuzz_bounded(black_box(&bound), 100, 1, (0.1, 5.0), exec))
        });
    }
    g.finish();
}

fn grid_search(c: &mut Criterion) {
    let bound = CubicBound::from_gamma(0.5).unwrap();
    let mut g = c.benchmark_group("brute_force_extremum");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("256", name), |b| {
            b.iter(|| brute_force_extremum(Problem::BoundedMin, 2.0, black_box(&bound), 256, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, certification, fuzzing, grid_search);
criterion_main!(benches);
