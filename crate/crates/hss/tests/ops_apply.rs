//! Apply / reconstruction / statistics checks, with the dense
//! reconstruction (itself validated entrywise against the accessor) as the
//! oracle for the fast paths.

mod common;

use common::*;
use hss::compress::{compress_symmetric, CompressionConfig, CompressionMode};
use hss::ops::{apply, apply_counted, apply_transpose, stats, to_dense, APPLY_FLOP_BOUND_FACTOR};
use hss::source::{dense_accessor, kernel_accessor, KernelKind, KernelSpec};
use hss::synthetic::synthetic_hss_accessor;
use hss::HssError;

fn tol_cfg(eps: f64, relative: bool, max_leaf: usize, seed: u64) -> CompressionConfig {
    let mut cfg = CompressionConfig::new(CompressionMode::Tolerance { eps, relative });
    cfg.max_leaf = max_leaf;
    cfg.seed = seed;
    cfg
}

#[test]
fn block_diagonal_apply_reduces_to_diagonal_matvec() {
    let a = block_diagonal(&[6, 6, 6, 6], 1);
    let acc = accessor_of(&a);
    let f = compress_symmetric(&acc, &tol_cfg(1e-12, false, 6, 2)).unwrap();
    let x = random_vector(24, 3);
    let fast = apply(&f, &x).unwrap();
    let direct = a.matvec(&x);
    assert!(vec_dist(&fast, &direct) <= 1e-13 * vec_norm(&direct));
}

#[test]
fn apply_of_zero_vector_is_zero() {
    let (_, truth) = synthetic_hss_accessor(2, 2, 6, 4, true).unwrap();
    let b = apply(&truth, &vec![0.0; truth.n()]).unwrap();
    assert!(b.iter().all(|&v| v == 0.0));
}

#[test]
fn apply_matches_dense_reconstruction_on_random_vectors() {
    let acc = kernel_accessor(KernelSpec::uniform_grid(KernelKind::LogDistance, 128)).unwrap();
    let f = compress_symmetric(&acc, &tol_cfg(1e-9, true, 16, 5)).unwrap();
    let dense = to_dense(&f).unwrap();
    let scale = dense.frob_norm();
    for seed in 0..20 {
        let x = random_vector(128, 1000 + seed);
        let fast = apply(&f, &x).unwrap();
        let slow = dense.matvec(&x);
        assert!(
            vec_dist(&fast, &slow) <= 1e-12 * scale * vec_norm(&x),
            "seed {seed}"
        );
    }
}

#[test]
fn apply_is_linear() {
    let (_, truth) = synthetic_hss_accessor(3, 3, 8, 6, false).unwrap();
    let n = truth.n();
    let (x, y) = (random_vector(n, 1), random_vector(n, 2));
    let (alpha, beta) = (0.7, -2.3);
    let combo: Vec<f64> = x
        .iter()
        .zip(&y)
        .map(|(a, b)| alpha * a + beta * b)
        .collect();
    let lhs = apply(&truth, &combo).unwrap();
    let fx = apply(&truth, &x).unwrap();
    let fy = apply(&truth, &y).unwrap();
    let rhs: Vec<f64> = fx
        .iter()
        .zip(&fy)
        .map(|(a, b)| alpha * a + beta * b)
        .collect();
    assert!(vec_dist(&lhs, &rhs) <= 1e-12 * vec_norm(&rhs).max(1.0));
}

#[test]
fn transpose_apply_equals_apply_for_symmetric() {
    let (_, truth) = synthetic_hss_accessor(3, 2, 8, 7, true).unwrap();
    let x = random_vector(truth.n(), 9);
    let a = apply(&truth, &x).unwrap();
    let at = apply_transpose(&truth, &x).unwrap();
    assert_eq!(a, at, "symmetric convention shares the code path");
}

#[test]
fn transpose_apply_matches_transposed_dense() {
    let (_, truth) = synthetic_hss_accessor(3, 3, 8, 8, false).unwrap();
    let dense_t = to_dense(&truth).unwrap().transpose();
    let scale = dense_t.frob_norm();
    for seed in 0..10 {
        let x = random_vector(truth.n(), 2000 + seed);
        let fast = apply_transpose(&truth, &x).unwrap();
        let slow = dense_t.matvec(&x);
        assert!(vec_dist(&fast, &slow) <= 1e-12 * scale * vec_norm(&x));
    }
}

#[test]
fn transpose_apply_of_basis_vector_recovers_matrix_row() {
    let (acc, truth) = synthetic_hss_accessor(2, 2, 6, 10, false).unwrap();
    let n = truth.n();
    let i = 7;
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    let row = apply_transpose(&truth, &e).unwrap();
    let scale = to_dense(&truth).unwrap().max_abs();
    for j in 0..n {
        assert!(
            (row[j] - acc.entry(i, j)).abs() <= 1e-12 * scale,
            "row {i}, col {j}"
        );
    }
}

#[test]
fn apply_rejects_wrong_length() {
    let (_, truth) = synthetic_hss_accessor(2, 1, 4, 11, true).unwrap();
    assert!(matches!(
        apply(&truth, &[1.0, 2.0]),
        Err(HssError::DimensionMismatch(_))
    ));
}

#[test]
fn depth_zero_reconstruction_is_the_diagonal_block() {
    let a = random_symmetric(8, 13);
    let acc = accessor_of(&a);
    let f = compress_symmetric(&acc, &tol_cfg(1e-10, false, 8, 1)).unwrap();
    assert_eq!(f.depth(), 0);
    assert_eq!(to_dense(&f).unwrap(), a);
    let x = random_vector(8, 14);
    assert!(vec_dist(&apply(&f, &x).unwrap(), &a.matvec(&x)) <= 1e-13 * vec_norm(&x));
}

#[test]
fn to_dense_matches_entrywise_accessor_evaluation() {
    let (acc, truth) = synthetic_hss_accessor(2, 3, 8, 15, true).unwrap();
    assert_eq!(acc.n(), 64);
    let dense = to_dense(&truth).unwrap();
    let scale = dense.max_abs();
    for i in 0..64 {
        for j in 0..64 {
            assert!(
                (dense.get(i, j) - acc.entry(i, j)).abs() <= 1e-12 * scale,
                "entry ({i},{j})"
            );
        }
    }
}

#[test]
fn recompression_of_reconstruction_stays_accurate() {
    let n = 256;
    let acc = kernel_accessor(KernelSpec::uniform_grid(KernelKind::LogDistance, n)).unwrap();
    let cfg = tol_cfg(1e-9, true, 32, 17);
    let f1 = compress_symmetric(&acc, &cfg).unwrap();
    let dense_src = log_kernel_dense(n);
    let d1 = to_dense(&f1).unwrap();
    let err1 = d1.rel_frob_dist(&dense_src);

    let acc2 = dense_accessor(d1.clone()).unwrap();
    let f2 = compress_symmetric(&acc2, &cfg).unwrap();
    let err2 = to_dense(&f2).unwrap().rel_frob_dist(&d1);
    assert!(
        err2 <= 10.0 * err1.max(1e-14),
        "err1 = {err1:.3e}, err2 = {err2:.3e}"
    );
}

#[test]
fn apply_flop_counter_stays_within_the_documented_bound() {
    let fixtures: Vec<hss::HssFactorization> = vec![
        synthetic_hss_accessor(1, 3, 4, 1, true).unwrap().1,
        synthetic_hss_accessor(8, 2, 16, 2, false).unwrap().1,
        {
            let acc =
                kernel_accessor(KernelSpec::uniform_grid(KernelKind::LogDistance, 256)).unwrap();
            compress_symmetric(&acc, &tol_cfg(1e-9, true, 64, 3)).unwrap()
        },
        {
            let a = block_diagonal(&[16, 16, 16, 16], 4);
            compress_symmetric(&accessor_of(&a), &tol_cfg(1e-12, false, 16, 4)).unwrap()
        },
    ];
    for f in &fixtures {
        let x = random_vector(f.n(), 5);
        let (_, flops) = apply_counted(f, &x).unwrap();
        let bound = APPLY_FLOP_BOUND_FACTOR * f.n() as u64 * f.max_rank().max(1) as u64;
        assert!(
            flops <= bound,
            "n = {}, k = {}: {flops} flops > bound {bound}",
            f.n(),
            f.max_rank()
        );
    }
}

#[test]
fn stats_of_block_diagonal_counts_only_leaf_storage() {
    let sizes = [8usize, 8, 8, 8];
    let a = block_diagonal(&sizes, 21);
    let f = compress_symmetric(&accessor_of(&a), &tol_cfg(1e-12, false, 8, 1)).unwrap();
    let s = stats(&f);
    assert_eq!(s.max_rank, 0);
    let expected: usize = sizes.iter().map(|m| m * m).sum();
    assert_eq!(s.stored_scalars, expected);
}

#[test]
fn stats_of_synthetic_shows_the_construction_rank_everywhere() {
    let k = 3;
    let (_, truth) = synthetic_hss_accessor(k, 3, 8, 23, true).unwrap();
    let s = stats(&truth);
    assert_eq!(s.max_rank, k);
    for level in &s.per_level {
        assert_eq!(level.max_row_rank, k);
        assert_eq!(level.max_col_rank, k);
        assert!((level.mean_row_rank - k as f64).abs() < 1e-12);
    }
}

#[test]
fn kernel_compression_ratio_regression() {
    // Recorded once: ratio 0.0952 at n = 1024, relative eps 1e-10, leaf 64.
    let acc = kernel_accessor(KernelSpec::uniform_grid(KernelKind::LogDistance, 1024)).unwrap();
    let f = compress_symmetric(&acc, &tol_cfg(1e-10, true, 64, 3)).unwrap();
    let s = stats(&f);
    assert!(s.compression_ratio < 0.2, "ratio {}", s.compression_ratio);
    assert!(
        (s.compression_ratio - 0.0952).abs() < 0.02,
        "ratio drifted from the recorded fixture: {}",
        s.compression_ratio
    );
}
