//! Property tests for the kernel invariants that hold on arbitrary
//! well-formed inputs.

use itl_core::matrix::{
    cholesky, energy_norm, numeric_rank, pseudo_inverse, sym_eig, GenMatrix, SymMatrix, RANK_TOL,
};
use itl_core::rng::SplitMix64;
use proptest::prelude::*;

fn random_sym(n: usize, seed: u64) -> SymMatrix {
    let mut rng = SplitMix64::new(seed);
    SymMatrix::from_fn(n, |_, _| rng.next_gaussian())
}

fn random_spd(n: usize, seed: u64) -> SymMatrix {
    let g = random_sym(n, seed).to_gen();
    let a = SymMatrix::from_gen(&g.transpose().matmul(&g));
    a.add(&SymMatrix::identity(n).scale(0.1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_norm_squares_to_quadratic_form(n in 2usize..9, seed in 0u64..1_000_000) {
        let a = random_spd(n, seed);
        let mut rng = SplitMix64::new(seed ^ 0xF00D);
        let v: Vec<f64> = (0..n).map(|_| rng.next_gaussian()).collect();
        let norm = energy_norm(&v, &a).unwrap();
        let quad = itl_core::matrix::dot(&v, &a.matvec(&v));
        prop_assert!((norm * norm - quad).abs() <= 1e-12 * quad.abs().max(1e-30));
    }

    #[test]
    fn spd_certifications_agree(n in 2usize..8, seed in 0u64..1_000_000) {
        // anything Cholesky accepts has a strictly positive spectrum
        let a = random_spd(n, seed);
        prop_assert!(cholesky(&a).is_ok());
        let eig = sym_eig(&a).unwrap();
        prop_assert!(eig.lambda_min() > 0.0);
    }

    #[test]
    fn pseudo_inverse_is_an_involution(n in 3usize..8, rank in 1usize..3, seed in 0u64..1_000_000) {
        // SPSD of fixed rank: G G^T with n x rank Gaussian G
        let mut rng = SplitMix64::new(seed);
        let g = GenMatrix::from_fn(n, rank.min(n - 1), |_, _| rng.next_gaussian());
        let a = SymMatrix::from_gen(&g.matmul(&g.transpose()));
        let pinv = pseudo_inverse(&a, RANK_TOL).unwrap();
        let back = pseudo_inverse(&pinv, RANK_TOL).unwrap();
        prop_assert!(back.max_abs_diff(&a) <= 1e-8 * a.max_abs().max(1e-30));
    }

    #[test]
    fn rank_and_nullity_split_the_columns(rows in 2usize..7, cols in 2usize..7, seed in 0u64..1_000_000) {
        let mut rng = SplitMix64::new(seed);
        // random matrix with a random number of duplicated columns
        let base = GenMatrix::from_fn(rows, cols, |_, _| rng.next_gaussian());
        let rank = numeric_rank(&base, RANK_TOL).unwrap();
        // nullspace dimension from the spectrum of B^T B at the same cut
        let gram = SymMatrix::from_gen(&base.transpose().matmul(&base));
        let eig = sym_eig(&gram).unwrap();
        let cut = eig.lambda_max().max(0.0) * (RANK_TOL * RANK_TOL).max(1e-12);
        let nullity = eig.values.iter().filter(|&&v| v <= cut).count();
        prop_assert_eq!(rank + nullity, cols);
    }

    #[test]
    fn matrix_market_round_trip(n in 1usize..6, seed in 0u64..1_000_000) {
        let mut rng = SplitMix64::new(seed);
        let a = SymMatrix::from_fn(n, |i, j| {
            if (i + j + seed as usize) % 3 == 0 { 0.0 } else { rng.next_gaussian() * 10f64.powi((seed % 40) as i32 - 20) }
        });
        let mut buf = Vec::new();
        itl_core::matrix::market::write_sym_coordinate(&mut buf, &a).unwrap();
        let back = itl_core::matrix::market::read(&buf[..], "mem").unwrap().into_sym().unwrap();
        prop_assert_eq!(back, a);
    }
}
