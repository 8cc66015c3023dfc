use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use qpm_bench::npp_config;
use qpm_core::huckel::{self, PiSystem};
use qpm_core::orbit::{sample_anomaly, sample_point};
use qpm_core::transport;

fn kepler(c: &mut Criterion) {
    let mut group = c.benchmark_group("kepler");
    for ecc in [0.0, 0.26, 0.9] {
        group.bench_with_input(BenchmarkId::new("sample_anomaly", ecc), &ecc, |b, &e| {
            b.iter(|| {
                let mut acc = 0.0;
                for k in 0..1000 {
                    acc += sample_anomaly(e, black_box(k as f64 / 1000.0)).unwrap();
                }
                acc
            })
        });
        group.bench_with_input(BenchmarkId::new("sample_point", ecc), &ecc, |b, &e| {
            b.iter(|| {
                let mut acc = 0.0;
                for k in 0..1000 {
                    acc += sample_point(e, black_box(k as f64 / 1000.0)).unwrap().cos_theta;
                }
                acc
            })
        });
    }
    group.finish();
}

fn engine(c: &mut Criterion) {
    let mut group = c.benchmark_group("engine");
    group.sample_size(10);
    for trials in [10usize, 100] {
        let cfg = npp_config(trials);
        group.bench_with_input(BenchmarkId::new("run_npp_3um", trials), &cfg, |b, cfg| {
            b.iter(|| transport::run(black_box(cfg)).unwrap())
        });
    }
    group.finish();
}

fn huckel_benzene(c: &mut Criterion) {
    let sys = PiSystem::benzene();
    c.bench_function("huckel_benzene", |b| b.iter(|| huckel::solve(black_box(&sys)).unwrap()));
}

criterion_group!(benches, kepler, engine, huckel_benzene);
criterion_main!(benches);
