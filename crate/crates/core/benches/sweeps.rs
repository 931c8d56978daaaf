use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ekman_core::boundary_layers::{BoundaryTrace, Side};
use ekman_core::direct::{solve_direct, DirectConfig};
use ekman_core::exec::Execution;
use ekman_core::harness::eigen_suite;
use ekman_core::{ModeIndex, Params, SpectralField, C64};

fn execs() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn bench_eigen(c: &mut Criterion) {
    let mut g = c.benchmark_group("eigen_suite_r4");
    for (name, exec) in execs() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| eigen_suite(4.0, exec).unwrap()));
    }
    g.finish();
}

fn bench_direct(c: &mut Criterion) {
    let p = Params::new(1e-2, 1e-2);
    let gamma = SpectralField::from_pairs(
        [(1, 0, 1), (0, 1, 1), (1, 1, 2), (2, 0, 1), (0, 2, -1), (2, 1, 1), (1, 2, 1), (3, 0, 2)]
            .map(|(a, b, k)| (ModeIndex::new(a, b, k), C64::new(1.0, 0.0))),
    );
    let mut g = c.benchmark_group("direct_8_modes");
    g.sample_size(10);
    for (name, exec) in execs() {
        let mut cfg = DirectConfig::new(0.02, 1e-4, 128);
        cfg.stride = 50;
        cfg.execution = exec;
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| solve_direct(&gamma, &BoundaryTrace::empty(Side::Top), &p, &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_eigen, bench_direct);
criterion_main!(benches);
