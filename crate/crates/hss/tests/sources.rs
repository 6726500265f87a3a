//! Accessor-level checks that need the dense SVD oracle or cross-adaptor
//! probing.

mod common;

use common::{log_kernel_dense, oracle_singular_values, random_symmetric, vec_dist, vec_norm};
use hss::source::{dense_accessor, kernel_accessor, KernelKind, KernelSpec};
use hss::synthetic::synthetic_hss_accessor;
use hss::MatrixAccessor;

/// entry(i, j) versus e_i^t A e_j through matvec, 50 random pairs.
fn consistency_scan(acc: &MatrixAccessor, seed: u64) {
    let n = acc.n();
    let mut state = seed;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 33) as usize % n
    };
    let mut scale = 1.0f64;
    for _ in 0..50 {
        let (i, j) = (next(), next());
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = acc.matvec(&e);
        let direct = acc.entry(i, j);
        scale = scale.max(direct.abs());
        assert!(
            (col[i] - direct).abs() <= 1e-12 * scale,
            "inconsistent entry at ({i},{j})"
        );
    }
}

#[test]
fn all_adaptors_are_entry_matvec_consistent() {
    let dense = dense_accessor(random_symmetric(24, 5)).unwrap();
    consistency_scan(&dense, 1);
    let kernel = kernel_accessor(KernelSpec::uniform_grid(KernelKind::ExpDecay, 40)).unwrap();
    consistency_scan(&kernel, 2);
    let (synth, _) = synthetic_hss_accessor(2, 2, 6, 7, true).unwrap();
    consistency_scan(&synth, 3);
    let (synth_ns, _) = synthetic_hss_accessor(2, 2, 6, 8, false).unwrap();
    consistency_scan(&synth_ns, 4);
}

#[test]
fn log_kernel_half_block_is_numerically_low_rank() {
    // Off-diagonal half of the N = 256 log kernel: the oracle spectrum drops
    // below 1e-10 after 15 singular values (recorded; bound allows 20).
    let full = log_kernel_dense(256);
    let rows: Vec<usize> = (0..128).collect();
    let cols: Vec<usize> = (128..256).collect();
    let half = full.select_rows(&rows).select_cols(&cols);
    let sv = oracle_singular_values(&half);
    let eps_rank = sv.iter().filter(|&&s| s >= 1e-10).count();
    assert_eq!(eps_rank, 15, "recorded oracle rank changed");
    assert!(eps_rank <= 20);
}

#[test]
fn kernel_matvec_matches_dense_materialization() {
    let spec = KernelSpec::uniform_grid(KernelKind::InverseDistance, 64);
    let acc = kernel_accessor(spec).unwrap();
    let full = acc.materialize();
    let x: Vec<f64> = (0..64).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
    let fast = acc.matvec(&x);
    let slow = full.matvec(&x);
    assert!(vec_dist(&fast, &slow) <= 1e-12 * vec_norm(&slow).max(1.0));
}
