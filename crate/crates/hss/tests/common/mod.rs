//! Shared fixtures and oracles for the integration suites.

#![allow(dead_code)]

use hss::dense::DenseMatrix;
use hss::rng::GaussianSource;
use hss::source::{dense_accessor, MatrixAccessor};

/// Random exactly-symmetric dense matrix.
pub fn random_symmetric(n: usize, seed: u64) -> DenseMatrix {
    let g = GaussianSource::from_seed(seed).matrix(n, n);
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, 0.5 * (g.get(i, j) + g.get(j, i)));
        }
    }
    m
}

/// Random block-diagonal matrix with square blocks of the given sizes.
pub fn block_diagonal(sizes: &[usize], seed: u64) -> DenseMatrix {
    let n: usize = sizes.iter().sum();
    let mut g = GaussianSource::from_seed(seed);
    let mut m = DenseMatrix::zeros(n, n);
    let mut off = 0;
    for &s in sizes {
        let block = g.matrix(s, s);
        for i in 0..s {
            for j in 0..s {
                let v = 0.5 * (block.get(i, j) + block.get(j, i));
                m.set(off + i, off + j, v);
            }
        }
        off += s;
    }
    m
}

/// Random rank-`k` matrix `L R` (not symmetric).
pub fn random_low_rank(n: usize, k: usize, seed: u64) -> DenseMatrix {
    let mut g = GaussianSource::from_seed(seed);
    let left = g.matrix(n, k);
    let right = g.matrix(k, n);
    left.matmul(&right)
}

/// Dense log-distance kernel matrix on the unit-spaced grid, zero diagonal.
pub fn log_kernel_dense(n: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m.set(i, j, (i as f64 - j as f64).abs().ln());
            }
        }
    }
    m
}

/// Upper-triangular copy of the log kernel: a genuinely non-symmetric
/// matrix with rank-structured off-diagonal blocks.
pub fn upper_triangular_log_kernel(n: usize) -> DenseMatrix {
    let mut m = log_kernel_dense(n);
    for i in 0..n {
        for j in 0..i {
            m.set(i, j, 0.0);
        }
    }
    m
}

pub fn accessor_of(m: &DenseMatrix) -> MatrixAccessor {
    dense_accessor(m.clone()).expect("dense accessor")
}

pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut g = GaussianSource::from_seed(seed);
    (0..n).map(|_| g.next_gaussian()).collect()
}

pub fn vec_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn vec_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Worst-case deviation of `q^t q` from the identity.
pub fn gram_error(q: &DenseMatrix) -> f64 {
    let g = q.t_matmul(q);
    let mut worst = 0.0f64;
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g.get(i, j) - want).abs());
        }
    }
    worst
}

/// Singular values by an independent implementation (nalgebra), used as the
/// dense SVD oracle against the crate's own kernels.
pub fn oracle_singular_values(a: &DenseMatrix) -> Vec<f64> {
    let m = nalgebra::DMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j));
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

/// Smallest `k` with `sqrt(sum_{i>k} s_i^2) <= eps` per the oracle spectrum.
pub fn oracle_eps_rank(a: &DenseMatrix, eps: f64) -> usize {
    let sv = oracle_singular_values(a);
    let mut suffix = vec![0.0; sv.len() + 1];
    for i in (0..sv.len()).rev() {
        suffix[i] = suffix[i + 1] + sv[i] * sv[i];
    }
    (0..=sv.len())
        .find(|&k| suffix[k] <= eps * eps)
        .unwrap_or(sv.len())
}
