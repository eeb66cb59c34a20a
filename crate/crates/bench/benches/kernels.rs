use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use std::hint::black_box;

use optomech::floquet::{self, FloquetOptions};
use optomech::integrator::{self, SolverOptions};
use optomech::model::{self, DriveModulation};
use optomech_bench::{modulated_drive, reference_drive};

// run with: cargo bench -p optomech-bench

fn eigenvalues(c: &mut Criterion) {
    let (p, amp) = reference_drive(0.9);
    c.bench_function("eigenvalues_linearized", |b| {
        b.iter(|| model::eigenvalues_linearized(black_box(&p), black_box(amp)).unwrap())
    });
    c.bench_function("threshold_amplitude", |b| {
        b.iter(|| model::threshold_amplitude(black_box(&p)).unwrap())
    });
}

fn monodromy(c: &mut Criterion) {
    let mut g = c.benchmark_group("monodromy");
    let opts = FloquetOptions::default();
    for ratio in [0.5, 1.0, 2.0] {
        let (p, drive) = modulated_drive(0.9, 0.2, ratio);
        g.bench_with_input(BenchmarkId::from_parameter(ratio), &drive, |b, d| {
            b.iter(|| floquet::monodromy(&p, black_box(d), &opts).unwrap())
        });
    }
    g.finish();
}

fn integrate(c: &mut Criterion) {
    let mut g = c.benchmark_group("integrate");
    g.sample_size(20);
    for ratio in [0.9, 1.5] {
        let (p, amp) = reference_drive(ratio);
        let drive = DriveModulation::constant(amp);
        let opts = SolverOptions::steady_state(&p, &drive);
        let init = integrator::pump_start(&p, &drive).unwrap();
        g.bench_with_input(BenchmarkId::new("steady_horizon", ratio), &init, |b, s| {
            b.iter_batched(
                || *s,
                |s| integrator::integrate(&p, &drive, &s, &opts).unwrap(),
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

criterion_group!(benches, eigenvalues, monodromy, integrate);
criterion_main!(benches);
