use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use recipstat_core::ladder::{aux_from_moments, hierarchy_iterate};
use recipstat_core::lax::{compatibility_residuals, default_z_samples};
use recipstat_core::mcsim::{mc_mgf, MCConfig};
use recipstat_core::moments::EnsembleParams;
use recipstat_core::painleve::p3_solve;
use recipstat_core::specialfun::bessel_k;
use rug::Float;

fn routes(c: &mut Criterion) {
    let mut group = c.benchmark_group("aux");
    for bits in [128u32, 256, 512] {
        let p = EnsembleParams::from_f64(1.3, 1.0, bits).unwrap();
        group.bench_with_input(BenchmarkId::new("moments", bits), &p, |b, p| b.iter(|| aux_from_moments(black_box(10), p).unwrap()));
        group.bench_with_input(BenchmarkId::new("hierarchy", bits), &p, |b, p| b.iter(|| hierarchy_iterate(black_box(10), p).unwrap()));
    }
    group.finish();
}

fn bessel(c: &mut Criterion) {
    let p = EnsembleParams::from_f64(1.3, 1.0, 256).unwrap();
    let nu = Float::with_val(256, 2.3);
    let x = Float::with_val(256, 2);
    c.bench_function("bessel_k 256 bits", |b| b.iter(|| bessel_k(black_box(&nu), black_box(&x), &p.ctx).unwrap()));
}

fn painleve(c: &mut Criterion) {
    let p = EnsembleParams::from_f64(0.5, 1.0, 256).unwrap();
    let mut group = c.benchmark_group("p3_solve");
    group.sample_size(10);
    for n in [0usize, 3] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| p3_solve(n, &p, 1.0, 1e-10).unwrap()));
    }
    group.finish();
}

fn lax(c: &mut Criterion) {
    let p = EnsembleParams::from_f64(0.5, 1.0, 256).unwrap();
    let z = default_z_samples();
    c.bench_function("lax compatibility n=3", |b| b.iter(|| compatibility_residuals(3, &p, &z).unwrap()));
}

fn monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("mc_mgf");
    group.sample_size(10);
    let cfg = MCConfig::new(5, 0.5, 1.0, 100_000, 1);
    group.bench_function("n=5, 1e5 draws", |b| b.iter(|| mc_mgf(black_box(&cfg)).unwrap()));
    group.finish();
}

criterion_group!(benches, routes, bessel, painleve, lax, monte_carlo);
criterion_main!(benches);
