//! Synthetic matrices whose off-diagonal blocks have exact rank `k` by
//! construction, with the ground-truth factorization returned alongside the
//! accessor. These stand in for fast analytic multipliers at desk scale:
//! the accessor's matvec runs the fast apply on the ground truth and its
//! entry evaluation reconstructs single entries through the telescoping
//! structure.

use std::sync::Arc;

use crate::dense::DenseMatrix;
use crate::error::{HssError, Result};
use crate::factorization::{Coupling, HssFactorization, HssForm, NodeData};
use crate::linalg::qr_factor;
use crate::ops;
use crate::rng::GaussianSource;
use crate::source::{MatrixAccessor, MatrixKernel};
use crate::tree::{build_uniform_tree, NodeId};

fn orthonormal_columns(rng: &mut GaussianSource, rows: usize, cols: usize) -> DenseMatrix {
    let (q, _) = qr_factor(&rng.matrix(rows, cols)).expect("gaussian qr");
    debug_assert_eq!(q.cols(), cols, "gaussian draw must have full rank");
    q
}

fn symmetrize(g: &DenseMatrix) -> DenseMatrix {
    let n = g.rows();
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, 0.5 * (g.get(i, j) + g.get(j, i)));
        }
    }
    out
}

/// Build the ground-truth factorization: orthonormalized Gaussian bases,
/// Gaussian couplings and Gaussian leaf diagonals (symmetrized in symmetric
/// mode, with `B_21 = B_12^t` implied by the storage convention).
fn generate_ground_truth(
    k: usize,
    levels: usize,
    leaf_size: usize,
    seed: u64,
    symmetric: bool,
) -> Result<HssFactorization> {
    if k < 1 {
        return Err(HssError::InvalidArgument("synthetic rank must be >= 1".into()));
    }
    if leaf_size < 2 * k {
        return Err(HssError::InvalidArgument(format!(
            "leaf_size {leaf_size} below 2k = {}; basis matrices would be rank-deficient",
            2 * k
        )));
    }
    let n = leaf_size << levels;
    let tree = build_uniform_tree(n, leaf_size)?;
    debug_assert_eq!(tree.depth(), levels);

    let mut rng = GaussianSource::from_seed(seed);
    let mut nodes: Vec<NodeData> = (0..tree.node_count()).map(|_| NodeData::default()).collect();
    for level in 0..=levels {
        for id in tree.nodes_at_level(level) {
            let mut data = NodeData::default();
            if tree.is_leaf(id) {
                let m = tree.node_size(id)?;
                let g = rng.matrix(m, m);
                data.diag = Some(if symmetric { symmetrize(&g) } else { g });
            } else {
                let b12 = rng.matrix(k, k);
                let b21 = if symmetric {
                    None
                } else {
                    Some(Coupling::Dense(rng.matrix(k, k)))
                };
                data.coupling = Some((Coupling::Dense(b12), b21));
            }
            if level > 0 {
                let rows = if tree.is_leaf(id) { tree.node_size(id)? } else { 2 * k };
                data.basis_u = Some(orthonormal_columns(&mut rng, rows, k));
                if !symmetric {
                    data.basis_v = Some(orthonormal_columns(&mut rng, rows, k));
                }
            }
            nodes[id.flat_index()] = data;
        }
    }
    HssFactorization::new(tree, symmetric, HssForm::General, nodes)
}

/// Row `local_index_of(g)` of the expanded basis of `node`, built by
/// descending to the leaf that owns `g` and climbing back up through the
/// transfer blocks. Costs `O(k^2)` per level.
fn expanded_basis_row(
    f: &HssFactorization,
    node: NodeId,
    g: usize,
    use_v: bool,
) -> Vec<f64> {
    let tree = f.tree();
    let basis = if use_v { f.basis_v(node) } else { f.basis_u(node) };
    if tree.is_leaf(node) {
        let start = tree.interval(node).expect("node in tree").start;
        return basis.row(g - start).to_vec();
    }
    let (c1, c2) = node.children();
    let in_left = tree.interval(c1).expect("child in tree").contains(&g);
    let child = if in_left { c1 } else { c2 };
    let child_rank = if use_v { f.col_rank(child) } else { f.row_rank(child) };
    let offset = if in_left {
        0
    } else if use_v {
        f.col_rank(c1)
    } else {
        f.row_rank(c1)
    };
    let inner = expanded_basis_row(f, child, g, use_v);
    debug_assert_eq!(inner.len(), child_rank);
    let mut out = vec![0.0; basis.cols()];
    for (a, &ra) in inner.iter().enumerate() {
        if ra == 0.0 {
            continue;
        }
        for (o, j) in out.iter_mut().zip(0..basis.cols()) {
            *o += ra * basis.get(offset + a, j);
        }
    }
    out
}

/// Single-entry evaluation via the telescoping structure: descend until the
/// two indices split into siblings (or land in one leaf) and contract the
/// coupling there with one expanded basis row from each side.
fn telescoping_entry(f: &HssFactorization, gi: usize, gj: usize) -> f64 {
    let tree = f.tree();
    let mut node = NodeId::ROOT;
    loop {
        if tree.is_leaf(node) {
            let start = tree.interval(node).expect("leaf in tree").start;
            return f.diag_block(node).get(gi - start, gj - start);
        }
        let (c1, c2) = node.children();
        let i1 = tree.interval(c1).expect("child in tree");
        let i_left = i1.contains(&gi);
        let j_left = i1.contains(&gj);
        match (i_left, j_left) {
            (true, true) => node = c1,
            (false, false) => node = c2,
            (true, false) => {
                let u_row = expanded_basis_row(f, c1, gi, false);
                let v_row = expanded_basis_row(f, c2, gj, true);
                let b = f.coupling_12(node).to_dense();
                let mut acc = 0.0;
                for (a, &ua) in u_row.iter().enumerate() {
                    let mut inner = 0.0;
                    for (bcol, &vb) in v_row.iter().enumerate() {
                        inner += b.get(a, bcol) * vb;
                    }
                    acc += ua * inner;
                }
                return acc;
            }
            (false, true) => {
                if f.is_symmetric() {
                    // Evaluate through the (left, right) orientation so the
                    // scan entry(i,j) == entry(j,i) holds bitwise.
                    let u_row = expanded_basis_row(f, c1, gj, false);
                    let v_row = expanded_basis_row(f, c2, gi, true);
                    let b = f.coupling_12(node).to_dense();
                    let mut acc = 0.0;
                    for (a, &ua) in u_row.iter().enumerate() {
                        let mut inner = 0.0;
                        for (bcol, &vb) in v_row.iter().enumerate() {
                            inner += b.get(a, bcol) * vb;
                        }
                        acc += ua * inner;
                    }
                    return acc;
                }
                let u_row = expanded_basis_row(f, c2, gi, false);
                let v_row = expanded_basis_row(f, c1, gj, true);
                let b = f.coupling_21(node).to_dense();
                let mut acc = 0.0;
                for (a, &ua) in u_row.iter().enumerate() {
                    let mut inner = 0.0;
                    for (bcol, &vb) in v_row.iter().enumerate() {
                        inner += b.get(a, bcol) * vb;
                    }
                    acc += ua * inner;
                }
                return acc;
            }
        }
    }
}

struct SyntheticKernel {
    truth: Arc<HssFactorization>,
    flops_matvec: u64,
    flops_entry: u64,
}

impl MatrixKernel for SyntheticKernel {
    fn dim(&self) -> usize {
        self.truth.n()
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        ops::apply(&self.truth, x).expect("ground truth apply")
    }

    fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        ops::apply_transpose(&self.truth, x).expect("ground truth transpose apply")
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        telescoping_entry(&self.truth, i, j)
    }

    fn flops_per_matvec(&self) -> u64 {
        self.flops_matvec
    }

    fn flops_per_entry(&self) -> u64 {
        self.flops_entry
    }
}

/// Accessor over an exact-rank-`k` matrix of `2^levels` leaves of
/// `leaf_size` indices each, plus its ground-truth factorization.
///
/// The accessor's matvec is the `O(n k)` fast apply; entries are evaluated
/// in `O(k^2 levels)`. Identical `(k, levels, leaf_size, seed, symmetric)`
/// always produce the same matrix.
pub fn synthetic_hss_accessor(
    k: usize,
    levels: usize,
    leaf_size: usize,
    seed: u64,
    symmetric: bool,
) -> Result<(MatrixAccessor, HssFactorization)> {
    let truth = generate_ground_truth(k, levels, leaf_size, seed, symmetric)?;
    let shared = Arc::new(truth.clone());
    let flops_matvec = ops::apply_counted(&shared, &vec![0.0; shared.n()])?.1;
    let flops_entry = (2 * k * k * levels.max(1) + 2 * k) as u64;
    let kernel = SyntheticKernel {
        truth: shared,
        flops_matvec,
        flops_entry,
    };
    Ok((MatrixAccessor::from_kernel(Box::new(kernel), symmetric), truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_case_has_exact_rank_one_off_diagonal() {
        let (acc, truth) = synthetic_hss_accessor(1, 1, 2, 5, true).unwrap();
        assert_eq!(acc.n(), 4);
        let dense = ops::to_dense(&truth).unwrap();
        // Off-diagonal 2x2 blocks factor as u * b * v^t with k = 1: every
        // 2x2 minor of the block vanishes.
        let det = dense.get(0, 2) * dense.get(1, 3) - dense.get(0, 3) * dense.get(1, 2);
        assert!(det.abs() <= 1e-12 * dense.frob_norm());
    }

    #[test]
    fn matvec_matches_dense_ground_truth() {
        for &symmetric in &[true, false] {
            let (acc, truth) = synthetic_hss_accessor(3, 3, 8, 11, symmetric).unwrap();
            let dense = ops::to_dense(&truth).unwrap();
            let mut g = GaussianSource::from_seed(23);
            for _ in 0..5 {
                let x: Vec<f64> = (0..acc.n()).map(|_| g.next_gaussian()).collect();
                let fast = acc.matvec(&x);
                let direct = dense.matvec(&x);
                let err: f64 = fast
                    .iter()
                    .zip(&direct)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let scale: f64 = direct.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(err <= 1e-12 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn entry_matches_dense_ground_truth_everywhere() {
        let (acc, truth) = synthetic_hss_accessor(2, 2, 4, 3, false).unwrap();
        let dense = ops::to_dense(&truth).unwrap();
        let scale = dense.max_abs();
        for i in 0..acc.n() {
            for j in 0..acc.n() {
                assert!(
                    (acc.entry(i, j) - dense.get(i, j)).abs() <= 1e-13 * scale,
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn symmetric_mode_is_exactly_symmetric() {
        let (acc, truth) = synthetic_hss_accessor(2, 2, 5, 9, true).unwrap();
        let dense = ops::to_dense(&truth).unwrap();
        let skew = dense.sub(&dense.transpose()).frob_norm();
        assert!(skew <= 1e-13 * dense.frob_norm());
        for i in 0..acc.n() {
            for j in 0..acc.n() {
                assert_eq!(acc.entry(i, j), acc.entry(j, i), "entry scan at ({i},{j})");
            }
        }
    }

    #[test]
    fn rejects_undersized_leaves() {
        assert!(matches!(
            synthetic_hss_accessor(3, 2, 5, 0, true),
            Err(HssError::InvalidArgument(_))
        ));
    }
}
