//! Property tests for the crate-wide invariants: rank behavior under
//! monotone maps, persistence round trips, copula monotonicity, and
//! h-function consistency.

use lgm_core::beta_copula::fit_ebc;
use lgm_core::data::{compute_ranks, LatentMatrix};
use lgm_core::io::{load_matrix, save_matrix};
use lgm_core::marginals::fit_marginal;
use lgm_core::vine::{h, h_inv};
use proptest::prelude::*;

fn finite_rows(n: std::ops::Range<usize>, d: std::ops::Range<usize>) -> BoxedStrategy<Vec<Vec<f64>>> {
    (n, d)
        .prop_flat_map(|(rows, cols)| {
            prop::collection::vec(
                prop::collection::vec(-1e6f64..1e6, cols..cols + 1),
                rows..rows + 1,
            )
        })
        .boxed()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ranks_are_invariant_under_increasing_maps(rows in finite_rows(1..12, 1..4)) {
        let y = LatentMatrix::from_rows(&rows).unwrap();
        let mapped: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|v| 3.0 * v + (v / 1e6).tanh()).collect())
            .collect();
        let yt = LatentMatrix::from_rows(&mapped).unwrap();
        prop_assert_eq!(compute_ranks(&y), compute_ranks(&yt));
    }

    #[test]
    fn tie_free_columns_rank_to_permutations(rows in finite_rows(2..20, 1..3)) {
        let y = LatentMatrix::from_rows(&rows).unwrap();
        let ranks = compute_ranks(&y);
        for j in 0..y.dim() {
            let col = y.column(j);
            let mut distinct = col.clone();
            distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
            distinct.dedup();
            if distinct.len() != col.len() {
                continue; // ties: permutation property does not apply
            }
            let mut sorted: Vec<u64> = ranks.ranks().column(j).to_vec();
            sorted.sort_unstable();
            let expected: Vec<u64> = (1..=y.n() as u64).collect();
            prop_assert_eq!(sorted, expected);
        }
    }

    #[test]
    fn persistence_round_trips(rows in finite_rows(1..10, 1..4), binary in any::<bool>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(if binary { "m.lgm" } else { "m.csv" });
        let y = LatentMatrix::from_rows(&rows).unwrap();
        save_matrix(&y, &path).unwrap();
        let back = load_matrix(&path).unwrap();
        prop_assert_eq!(back.n(), y.n());
        prop_assert_eq!(back.dim(), y.dim());
        for (a, b) in y.data().iter().zip(back.data().iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn copula_cdf_is_coordinatewise_monotone(
        seed in 0u64..1000,
        u0 in 0.0f64..1.0,
        u1 in 0.0f64..1.0,
        bump in 0.0f64..1.0,
        coord in 0usize..2,
    ) {
        let mut rng_rows = Vec::new();
        let mut state = seed;
        for _ in 0..12 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = (state >> 11) as f64 / (1u64 << 53) as f64;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = (state >> 11) as f64 / (1u64 << 53) as f64;
            rng_rows.push(vec![a, b]);
        }
        let y = LatentMatrix::from_rows(&rng_rows).unwrap();
        let model = fit_ebc(&y, None).unwrap();
        let base = [u0, u1];
        let mut raised = base;
        raised[coord] = (raised[coord] + bump).min(1.0);
        let lo = model.cdf(&base).unwrap();
        let hi = model.cdf(&raised).unwrap();
        prop_assert!(hi >= lo - 1e-12, "raising u[{}] lowered the cdf: {} -> {}", coord, lo, hi);
    }

    #[test]
    fn marginal_inverse_is_a_right_inverse(
        mut centers in prop::collection::vec(-50.0f64..50.0, 3..20),
        u in 0.001f64..0.999,
    ) {
        centers.dedup();
        prop_assume!(centers.len() >= 3);
        let m = match fit_marginal(&centers) {
            Ok(m) => m,
            Err(_) => return Ok(()), // degenerate column
        };
        let x = m.inverse_cdf(u).unwrap();
        prop_assert!((m.cdf(x) - u).abs() < 1e-9);
    }

    #[test]
    fn h_round_trips_inside_the_safe_envelope(
        u in 0.01f64..0.99,
        v in 0.01f64..0.99,
        rho in -0.85f64..0.85,
    ) {
        let w = h(u, v, rho);
        prop_assert!(w > 0.0 && w < 1.0);
        let back = h_inv(w, v, rho);
        prop_assert!((back - u).abs() < 1e-7, "u={} back={}", u, back);
    }
}
