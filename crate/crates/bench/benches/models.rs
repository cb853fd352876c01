//! Fit and sampling benchmarks across the six latent-space models, at a
//! size where even the quadratic fits finish quickly. Larger runs (the
//! n = 2000, d = 100 setting of the acceptance suite) follow the same
//! relative ordering with a wider spread.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use lgm_bench::correlated_gaussian;
use lgm_core::beta_copula::fit_ebc;
use lgm_core::density::{fit_gaussian, fit_gmm_em, fit_independent, fit_mkde_cv};
use lgm_core::model::LatentModel;
use lgm_core::vine::fit_vine;

const N: usize = 1000;
const D: usize = 8;

fn bench_fit(c: &mut Criterion) {
    let y = correlated_gaussian(1, N, D, 0.5);
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);
    group.bench_function("gauss", |b| b.iter(|| black_box(fit_gaussian(&y).unwrap())));
    group.bench_function("indep", |b| {
        b.iter(|| black_box(fit_independent(&y).unwrap()))
    });
    group.bench_function("gmm_m10", |b| {
        b.iter(|| black_box(fit_gmm_em(&y, 10, 0, 200, 1e-6).unwrap()))
    });
    group.bench_function("ebc", |b| b.iter(|| black_box(fit_ebc(&y, None).unwrap())));
    group.bench_function("mkde_cv", |b| {
        b.iter(|| black_box(fit_mkde_cv(&y, &[0.25, 0.5, 1.0, 2.0, 4.0], 10, 0).unwrap()))
    });
    group.bench_function("vine_t5", |b| b.iter(|| black_box(fit_vine(&y, 5).unwrap())));
    group.finish();
}

fn bench_sample(c: &mut Criterion) {
    let y = correlated_gaussian(2, N, D, 0.5);
    let models: Vec<(&str, LatentModel)> = vec![
        ("gauss", LatentModel::Gauss(fit_gaussian(&y).unwrap())),
        ("indep", LatentModel::Indep(fit_independent(&y).unwrap())),
        (
            "gmm_m10",
            LatentModel::Gmm(fit_gmm_em(&y, 10, 0, 200, 1e-6).unwrap().0),
        ),
        ("ebc", LatentModel::Ebc(fit_ebc(&y, None).unwrap())),
        (
            "mkde_cv",
            LatentModel::Mkde(fit_mkde_cv(&y, &[0.5, 1.0, 2.0], 10, 0).unwrap()),
        ),
        ("vine_t5", LatentModel::Vine(fit_vine(&y, 5).unwrap())),
    ];
    let mut group = c.benchmark_group("sample_1000");
    group.sample_size(10);
    for (name, model) in &models {
        group.bench_function(*name, |b| {
            let mut seed = 0u64;
            b.iter(|| {
                seed += 1;
                black_box(model.sample(1000, seed).unwrap())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fit, bench_sample);
criterion_main!(benches);
