use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sensched_core::blocklinalg::logdet_dense;
use sensched_core::entropy_oracle::EntropyObjective;
use sensched_core::instances::{random_instance, random_spd_block_tridiagonal, random_vector, PriorKind};
use sensched_core::{BlockTridiagonalMatrix, Error};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn block_logdet_matches_dense(seed in any::<u64>(), n in 1usize..=4, k in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_spd_block_tridiagonal(n, k, &mut rng);
        let sparse = m.logdet().unwrap();
        let dense = logdet_dense(&m.to_dense()).unwrap();
        prop_assert!((sparse - dense).abs() <= 1e-9 * dense.abs().max(1.0));
    }

    #[test]
    fn block_solve_has_small_residual(seed in any::<u64>(), n in 1usize..=4, k in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_spd_block_tridiagonal(n, k, &mut rng);
        let b = random_vector(n * k, 1.0, &mut rng);
        let x = m.solve(&b).unwrap();
        let r = m.mul_vec(&x).unwrap() - &b;
        prop_assert!(r.amax() <= 1e-9 * b.amax().max(1.0));
    }

    #[test]
    fn negative_shift_is_rejected(seed in any::<u64>(), n in 1usize..=3, k in 2usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_spd_block_tridiagonal(n, k, &mut rng);
        let big = m.to_dense().amax() * (n * k) as f64 * 4.0;
        let bad = m.shifted(-big);
        let rejected = matches!(bad.logdet(), Err(Error::NotPositiveDefinite { .. }));
        prop_assert!(rejected);
    }
}

#[test]
fn indefinite_pivot_is_located() {
    let one = DMatrix::from_element(1, 1, 1.0);
    let m = BlockTridiagonalMatrix::new(vec![one.clone(), one.clone()], vec![one * 2.0]).unwrap();
    assert!(matches!(m.logdet(), Err(Error::NotPositiveDefinite { block: Some(1) })));
    assert!(m.solve(&DVector::zeros(2)).is_err());
}

/// Every subset of the `m * K` (step, sensor) pairs as a bitmask.
fn sets_of(mask: usize, m: usize, horizon: usize) -> Vec<Vec<usize>> {
    (0..horizon)
        .map(|k| (0..m).filter(|&i| mask >> (k * m + i) & 1 == 1).collect())
        .collect()
}

#[test]
fn entropy_is_monotone_and_supermodular() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let shapes = [(1, 8), (2, 4), (4, 2), (8, 1), (3, 2), (2, 3)];
    let mut triples = 0u64;
    for kind in PriorKind::ALL {
        for &(m, horizon) in &shapes {
            let ctx = random_instance(kind, 2, horizon, m, &mut rng).unwrap();
            let bits = m * horizon;
            let h: Vec<f64> = (0..1usize << bits)
                .map(|mask| ctx.evaluate(&sets_of(mask, m, horizon)).unwrap())
                .collect();
            for b in 0..1usize << bits {
                for c in 0..bits {
                    if b >> c & 1 == 1 {
                        continue;
                    }
                    let bc = b | 1 << c;
                    assert!(h[bc] <= h[b] + 1e-9, "monotonicity");
                    // Every A contained in B.
                    let mut a = b;
                    loop {
                        let gain_a = h[a] - h[a | 1 << c];
                        let gain_b = h[b] - h[bc];
                        assert!(gain_a + 1e-9 >= gain_b, "{kind:?} m={m} K={horizon}");
                        triples += 1;
                        if a == 0 {
                            break;
                        }
                        a = (a - 1) & b;
                    }
                }
            }
        }
    }
    assert!(triples > 100_000);
}
