use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use schatten_core::equilibrium::{energy, gradient};
use schatten_core::partition::{log_z_importance, log_z_quadrature};
use schatten_core::{EnsembleParams, ParticleConfig, RandomStream, UllmanDistribution};

fn chebyshev_config(n: usize, p: f64) -> ParticleConfig {
    let points = (0..n)
        .map(|i| -((2 * i + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos())
        .collect();
    ParticleConfig::new(points, p).unwrap()
}

fn energy_and_gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("equilibrium");
    for n in [50, 200, 800] {
        let config = chebyshev_config(n, 4.0);
        group.bench_with_input(BenchmarkId::new("energy", n), &config, |b, cfg| {
            b.iter(|| energy(black_box(cfg)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("gradient", n), &config, |b, cfg| {
            b.iter(|| gradient(black_box(cfg)).unwrap())
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("importance");
    group.sample_size(10);
    for n in [3, 6] {
        let params = EnsembleParams::new(n, 4.0, 2.0).unwrap();
        let stream = RandomStream::new(7, 0);
        group.bench_with_input(BenchmarkId::new("log_z_100k", n), &params, |b, prm| {
            b.iter(|| log_z_importance(black_box(prm), 100_000, &stream).ok())
        });
    }
    group.finish();
}

fn quadrature(c: &mut Criterion) {
    let mut group = c.benchmark_group("quadrature");
    group.sample_size(10);
    group.bench_function("ullman_constants_p3", |b| {
        b.iter(|| UllmanDistribution::new(black_box(3.0)).unwrap().constants().unwrap())
    });
    let params = EnsembleParams::new(2, 3.0, 2.0).unwrap();
    group.bench_function("log_z_quadrature_n2", |b| {
        b.iter(|| log_z_quadrature(black_box(&params)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, energy_and_gradient, monte_carlo, quadrature);
criterion_main!(benches);
