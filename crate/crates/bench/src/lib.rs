//! Shared dataset builders for the benchmarks.

use lgm_core::data::LatentMatrix;
use lgm_core::rng::seeded_rng;
use rand_distr::{Distribution, StandardNormal};

/// Equicorrelated Gaussian rows with the given pairwise correlation.
pub fn correlated_gaussian(seed: u64, n: usize, d: usize, rho: f64) -> LatentMatrix {
    let mut rng = seeded_rng(seed);
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            (0..d)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    a * g + b * e
                })
                .collect()
        })
        .collect();
    LatentMatrix::from_rows(&rows).expect("finite rows")
}
