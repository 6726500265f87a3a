//! Acceptance suite: every release criterion as one test, each printing a
//! PASS line with its measured numbers (run with `--nocapture` to see them).
//! Tolerances are pinned here, not configurable.

mod common;

use common::*;
use hss::bench::bench_scaling;
use hss::compress::{
    compress_nonsymmetric, compress_symmetric, CompressionConfig, CompressionMode,
};
use hss::factorization::HssFactorization;
use hss::io::to_bytes;
use hss::ops::{apply_counted, stats, to_dense, APPLY_FLOP_BOUND_FACTOR};
use hss::orthonormalize::orthonormalize_any;
use hss::source::{kernel_accessor, KernelKind, KernelSpec};
use hss::synthetic::synthetic_hss_accessor;
use hss::Coupling;

fn tol_cfg(eps: f64, relative: bool, max_leaf: usize, seed: u64) -> CompressionConfig {
    let mut cfg = CompressionConfig::new(CompressionMode::Tolerance { eps, relative });
    cfg.max_leaf = max_leaf;
    cfg.seed = seed;
    cfg
}

/// The shared fixture family used by the "every fixture" criteria.
fn fixture_set() -> Vec<(&'static str, HssFactorization)> {
    let mut out: Vec<(&'static str, HssFactorization)> = Vec::new();

    let (acc, _) = synthetic_hss_accessor(3, 3, 8, 301, true).unwrap();
    let cfg = CompressionConfig::fixed_rank(3).with_seed(1).with_max_leaf(8);
    out.push(("synthetic k=3 symmetric", compress_symmetric(&acc, &cfg).unwrap()));

    let (acc, _) = synthetic_hss_accessor(8, 3, 32, 302, true).unwrap();
    let cfg = CompressionConfig::fixed_rank(8).with_seed(2).with_max_leaf(32);
    out.push(("synthetic k=8 symmetric", compress_symmetric(&acc, &cfg).unwrap()));

    let (acc, _) = synthetic_hss_accessor(3, 3, 8, 303, false).unwrap();
    let cfg = CompressionConfig::fixed_rank(3).with_seed(3).with_max_leaf(8);
    out.push(("synthetic k=3 nonsymmetric", compress_nonsymmetric(&acc, &cfg).unwrap()));

    let acc = kernel_accessor(KernelSpec::uniform_grid(KernelKind::LogDistance, 256)).unwrap();
    out.push((
        "log kernel n=256 tolerance",
        compress_symmetric(&acc, &tol_cfg(1e-10, true, 32, 4)).unwrap(),
    ));

    let a = block_diagonal(&[8, 8, 8, 8], 305);
    out.push((
        "block diagonal",
        compress_symmetric(&accessor_of(&a), &tol_cfg(1e-12, false, 8, 5)).unwrap(),
    ));

    let a = upper_triangular_log_kernel(64);
    let eps = 1e-10 * a.frob_norm();
    out.push((
        "triangular kernel nonsymmetric",
        compress_nonsymmetric(&accessor_of(&a), &tol_cfg(eps, false, 8, 6)).unwrap(),
    ));

    let a = random_symmetric(8, 306);
    out.push((
        "depth zero",
        compress_symmetric(&accessor_of(&a), &tol_cfg(1e-10, false, 8, 7)).unwrap(),
    ));

    let orth: Vec<(&'static str, HssFactorization)> = out
        .iter()
        .filter(|(name, _)| !name.contains("depth zero"))
        .map(|(_, f)| ("orthonormalized variant", orthonormalize_any(f).unwrap()))
        .collect();
    out.extend(orth);
    out
}

#[test]
fn criterion_01_exact_rank_recovery_over_100_seeds() {
    let mut worst = 0.0f64;
    for &k in &[1usize, 3, 8] {
        for &n in &[256usize, 1024] {
            let leaf = 32;
            let levels = (n / leaf).trailing_zeros() as usize;
            let (acc, truth) = synthetic_hss_accessor(k, levels, leaf, 400 + k as u64, true).unwrap();
            let dense_truth = to_dense(&truth).unwrap();
            for seed in 0..100u64 {
                let cfg = CompressionConfig::fixed_rank(k).with_seed(seed).with_max_leaf(leaf);
                let f = compress_symmetric(&acc, &cfg)
                    .unwrap_or_else(|e| panic!("k={k} n={n} seed={seed}: {e}"));
                let err = to_dense(&f).unwrap().rel_frob_dist(&dense_truth);
                worst = worst.max(err);
                assert!(err <= 1e-11, "k={k} n={n} seed={seed}: err={err:.3e}");
            }
        }
    }
    println!("criterion 01 exact-rank recovery: PASS (600 runs, worst err {worst:.3e} <= 1e-11)");
}

#[test]
fn criterion_02_log_kernel_accuracy_at_1e10() {
    let n = 1024;
    let acc = kernel_accessor(KernelSpec::uniform_grid(KernelKind::LogDistance, n)).unwrap();
    let f = compress_symmetric(&acc, &tol_cfg(1e-10, true, 64, 11)).unwrap();
    let dense = log_kernel_dense(n);
    let err = to_dense(&f).unwrap().rel_frob_dist(&dense);
    assert!(err <= 1e-9, "err = {err:.3e}");
    println!("criterion 02 kernel accuracy: PASS (n=1024, rel err {err:.3e} <= 1e-9)");
}

#[test]
fn criterion_03_matvec_budget_is_exact() {
    let (acc, _) = synthetic_hss_accessor(8, 3, 32, 501, true).unwrap();
    let cfg = CompressionConfig::fixed_rank(8).with_seed(1).with_max_leaf(32);
    let before = acc.counters().snapshot();
    compress_symmetric(&acc, &cfg).unwrap();
    let d = acc.counters().snapshot().delta(&before);
    let l = cfg.sample_width() as u64;
    assert_eq!(d.matvec_count, l);
    assert_eq!(d.transpose_matvec_count, 0);

    let (acc_ns, _) = synthetic_hss_accessor(8, 3, 32, 502, false).unwrap();
    let before = acc_ns.counters().snapshot();
    compress_nonsymmetric(&acc_ns, &cfg).unwrap();
    let dn = acc_ns.counters().snapshot().delta(&before);
    assert_eq!(dn.matvec_count, l);
    assert_eq!(dn.transpose_matvec_count, l);
    println!(
        "criterion 03 matvec budget: PASS (symmetric {l} matvecs; nonsymmetric {l}+{l} transpose)"
    );
}

#[test]
fn criterion_04_entry_budget_and_linearity() {
    // Budget on a fixture sweep.
    for (&k, &n) in [3usize, 8].iter().zip([256usize, 1024].iter()) {
        let leaf = 32;
        let levels = (n / leaf).trailing_zeros() as usize;
        let (acc, _) = synthetic_hss_accessor(k, levels, leaf, 600 + k as u64, true).unwrap();
        let cfg = CompressionConfig::fixed_rank(k).with_seed(3).with_max_leaf(leaf);
        let before = acc.counters().snapshot();
        let f = compress_symmetric(&acc, &cfg).unwrap();
        let d = acc.counters().snapshot().delta(&before);
        let tree = f.tree();
        let leaf_entries: u64 = tree
            .leaves()
            .map(|lf| {
                let m = tree.node_size(lf).unwrap() as u64;
                m * m
            })
            .sum();
        let kmax = f.max_rank() as u64;
        let bound = leaf_entries + 6 * kmax * kmax * tree.node_count() as u64;
        assert!(
            d.entry_count <= bound,
            "k={k} n={n}: {} entries > bound {bound}",
            d.entry_count
        );
    }

    // entry_count / n constant within +/- 20% across sizes at fixed rank.
    let mut per_n = Vec::new();
    for &n in &[512usize, 1024, 2048, 4096] {
        let leaf = 64;
        let levels = (n / leaf).trailing_zeros() as usize;
        let (acc, _) = synthetic_hss_accessor(8, levels, leaf, 700, true).unwrap();
        let cfg = CompressionConfig::fixed_rank(8).with_seed(4).with_max_leaf(leaf);
        let before = acc.counters().snapshot();
        compress_symmetric(&acc, &cfg).unwrap();
        let d = acc.counters().snapshot().delta(&before);
        per_n.push(d.entry_count as f64 / n as f64);
    }
    let mean = per_n.iter().sum::<f64>() / per_n.len() as f64;
    for (i, &v) in per_n.iter().enumerate() {
        assert!(
            (v - mean).abs() <= 0.2 * mean,
            "entry/n at size index {i}: {v:.2} vs mean {mean:.2}"
        );
    }
    println!(
        "criterion 04 entry budget: PASS (entry/n = {per_n:.2?}, spread within 20% of {mean:.2})"
    );
}

#[test]
fn criterion_05_apply_matches_dense_reconstruction() {
    let mut worst = 0.0f64;
    for (name, f) in fixture_set() {
        let dense = to_dense(&f).unwrap();
        let scale = dense.frob_norm();
        for seed in 0..20u64 {
            let x = random_vector(f.n(), 900 + seed);
            let (fast, flops) = apply_counted(&f, &x).unwrap();
            let slow = dense.matvec(&x);
            let err = vec_dist(&fast, &slow) / (scale * vec_norm(&x)).max(f64::MIN_POSITIVE);
            worst = worst.max(err);
            assert!(err <= 1e-12, "{name}, seed {seed}: err = {err:.3e}");
            let bound = APPLY_FLOP_BOUND_FACTOR * f.n() as u64 * f.max_rank().max(1) as u64;
            assert!(flops <= bound, "{name}: {flops} flops > {bound}");
        }
    }
    println!("criterion 05 apply equivalence: PASS (worst rel dev {worst:.3e} <= 1e-12, flop bound held)");
}

#[test]
fn criterion_06_orthonormalization_postconditions() {
    let mut checked = 0;
    for (name, f) in fixture_set() {
        if f.depth() == 0 {
            continue;
        }
        let g = orthonormalize_any(&f).unwrap_or_else(|e| panic!("{name}: {e}"));
        for level in 1..=g.depth() {
            for node in g.tree().nodes_at_level(level) {
                assert!(gram_error(g.basis_u(node)) <= 1e-12, "{name} row basis");
                assert!(gram_error(g.basis_v(node)) <= 1e-12, "{name} column basis");
            }
        }
        for level in 0..g.depth() {
            for node in g.tree().nodes_at_level(level) {
                assert!(
                    matches!(g.coupling_12(node), Coupling::Diagonal { .. }),
                    "{name}: coupling not structurally diagonal"
                );
            }
        }
        for leaf in g.tree().leaves() {
            assert_eq!(
                f.diag_block(leaf).data(),
                g.diag_block(leaf).data(),
                "{name}: diagonal blocks must be carried over bitwise"
            );
        }
        let err = to_dense(&g).unwrap().rel_frob_dist(&to_dense(&f).unwrap());
        assert!(err <= 1e-12, "{name}: preservation err = {err:.3e}");
        checked += 1;
    }
    println!("criterion 06 orthonormalization: PASS ({checked} fixtures, preservation <= 1e-12)");
}

#[test]
fn criterion_07_nonsymmetric_exact_rank_recovery() {
    let (acc, truth) = synthetic_hss_accessor(5, 3, 12, 801, false).unwrap();
    let cfg = CompressionConfig::fixed_rank(5).with_seed(7).with_max_leaf(12);
    let f = compress_nonsymmetric(&acc, &cfg).unwrap();
    let err = to_dense(&f).unwrap().rel_frob_dist(&to_dense(&truth).unwrap());
    assert!(err <= 1e-11, "err = {err:.3e}");
    println!("criterion 07 nonsymmetric recovery: PASS (err {err:.3e} <= 1e-11)");
}

#[test]
fn criterion_08_sweep_phase_scales_near_linearly() {
    let rows = bench_scaling(&[512, 1024, 2048, 4096], 8, 64, 42, 10, 5).unwrap();
    let mut ratios = Vec::new();
    for row in &rows {
        assert_eq!(row.matvec_count, 18, "matvec count must be k+10 at every size");
        if let Some(r) = row.sweep_ratio_vs_prev {
            ratios.push(r);
            assert!(
                (1.4..=3.2).contains(&r),
                "sweep ratio {r:.2} outside [1.4, 3.2]; times: {:?}",
                rows.iter().map(|x| x.sweep_ms).collect::<Vec<_>>()
            );
        }
    }
    assert_eq!(ratios.len(), 3);
    println!(
        "criterion 08 scaling: PASS (sweep ratios {:?} within [1.4, 3.2])",
        ratios.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>()
    );
}

#[test]
fn criterion_09_serialization_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut count = 0;
    for (name, f) in fixture_set() {
        let path = dir.path().join(format!("fixture_{count}.hssf"));
        hss::io::save_file(&f, &path).unwrap();
        let loaded = hss::io::load_file(&path).unwrap();
        let before = to_dense(&f).unwrap();
        let after = to_dense(&loaded).unwrap();
        assert_eq!(before.data(), after.data(), "{name}: reconstruction changed");
        count += 1;
    }
    println!("criterion 09 serialization: PASS ({count} fixtures bit-exact through save/load)");
}

#[test]
fn criterion_10_identical_runs_are_bitwise_identical() {
    let (acc, _) = synthetic_hss_accessor(4, 3, 16, 901, true).unwrap();
    let cfg = CompressionConfig::fixed_rank(4).with_seed(77).with_max_leaf(16);
    let run1 = to_bytes(&compress_symmetric(&acc, &cfg).unwrap()).unwrap();
    let run2 = to_bytes(&compress_symmetric(&acc, &cfg).unwrap()).unwrap();
    assert_eq!(run1, run2);

    let (acc_ns, _) = synthetic_hss_accessor(4, 3, 16, 902, false).unwrap();
    let r1 = to_bytes(&compress_nonsymmetric(&acc_ns, &cfg).unwrap()).unwrap();
    let r2 = to_bytes(&compress_nonsymmetric(&acc_ns, &cfg).unwrap()).unwrap();
    assert_eq!(r1, r2);
    println!("criterion 10 determinism: PASS (identical factorization bytes across runs)");
}

#[test]
fn fixture_set_is_representative() {
    // The "every fixture" criteria above rely on this family covering both
    // conventions, both forms and a degenerate tree.
    let set = fixture_set();
    assert!(set.iter().any(|(_, f)| f.is_symmetric()));
    assert!(set.iter().any(|(_, f)| !f.is_symmetric()));
    assert!(set.iter().any(|(_, f)| f.depth() == 0));
    assert!(set.iter().any(|(_, f)| f.form() == hss::HssForm::Orthonormal));
    assert!(set.len() >= 10);
    let s = stats(&set[0].1);
    assert!(s.max_rank > 0);
}
