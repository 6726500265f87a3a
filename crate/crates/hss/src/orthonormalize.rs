//! Recompression of a factorization into column-orthonormal bases with
//! structurally diagonal coupling blocks. The represented matrix is
//! preserved; the diagonal blocks are not touched at all.
//!
//! The pass works finer to coarser. For each sibling pair the bases are
//! QR-factored, the coupling is rotated into the new bases and diagonalized
//! by an SVD, and the parent's transfer block absorbs the triangular
//! factors. The SVDs use full square orthogonal factors so that the update
//! is exact even when sibling ranks differ or a coupling is rank-deficient.

use crate::dense::DenseMatrix;
use crate::error::{HssError, Result};
use crate::factorization::{Coupling, HssFactorization, HssForm, NodeData};
use crate::linalg::{qr_factor, svd_full};

fn split_rows(m: &DenseMatrix, top_rows: usize) -> (DenseMatrix, DenseMatrix) {
    (
        m.rows_range(0..top_rows),
        m.rows_range(top_rows..m.rows()),
    )
}

fn clear_skeletons(nodes: &mut [NodeData]) {
    for node in nodes {
        node.row_skeleton.clear();
        node.col_skeleton.clear();
    }
}

/// Orthonormalize a factorization stored in the symmetric convention.
///
/// Every output basis has orthonormal columns, every coupling is a diagonal
/// of nonnegative descending singular values, and the diagonal blocks are
/// carried over bitwise.
pub fn orthonormalize(f: &HssFactorization) -> Result<HssFactorization> {
    if !f.is_symmetric() {
        return Err(HssError::InvalidInput(
            "orthonormalize expects the symmetric convention; use the non-symmetric variant"
                .into(),
        ));
    }
    let tree = f.tree().clone();
    let depth = tree.depth();
    let mut nodes: Vec<NodeData> = f.nodes().to_vec();
    if depth == 0 {
        return HssFactorization::new(tree, true, HssForm::Orthonormal, nodes);
    }

    // Working copies of the bases, overwritten as pairs are processed.
    let mut tmp: Vec<Option<DenseMatrix>> = vec![None; tree.node_count()];
    for leaf in tree.leaves() {
        tmp[leaf.flat_index()] = Some(f.basis_u(leaf).clone());
    }

    for level in (0..depth).rev() {
        for node in tree.nodes_at_level(level) {
            let (c1, c2) = node.children();
            let u1 = tmp[c1.flat_index()].take().expect("child basis");
            let u2 = tmp[c2.flat_index()].take().expect("child basis");
            let (w1, r1) = qr_factor(&u1)?;
            let (w2, r2) = qr_factor(&u2)?;

            let b12 = f.coupling_12(node).to_dense();
            let rotated = r1.matmul(&b12).matmul_t(&r2);
            let (wt1, sigma, wt2) = svd_full(&rotated);

            nodes[c1.flat_index()].basis_u = Some(w1.matmul(&wt1));
            nodes[c2.flat_index()].basis_u = Some(w2.matmul(&wt2));
            nodes[node.flat_index()].coupling = Some((
                Coupling::Diagonal {
                    rows: rotated.rows(),
                    cols: rotated.cols(),
                    values: sigma,
                },
                None,
            ));

            if level > 0 {
                // Fold the basis change into the parent transfer block.
                let u_hat = f.basis_u(node);
                let (top, bottom) = split_rows(u_hat, f.row_rank(c1));
                let new_top = wt1.t_matmul(&r1).matmul(&top);
                let new_bottom = wt2.t_matmul(&r2).matmul(&bottom);
                tmp[node.flat_index()] = Some(DenseMatrix::vstack(&[&new_top, &new_bottom]));
            }
        }
    }

    clear_skeletons(&mut nodes);
    HssFactorization::new(tree, true, HssForm::Orthonormal, nodes)
}

/// Orthonormalize a non-symmetric factorization: row- and column-side bases
/// get independent QR factors, each coupling is diagonalized by its own SVD
/// and both parent transfer blocks are updated.
pub fn orthonormalize_nonsymmetric(f: &HssFactorization) -> Result<HssFactorization> {
    if f.is_symmetric() {
        return Err(HssError::InvalidInput(
            "factorization is in the symmetric convention; use orthonormalize".into(),
        ));
    }
    let tree = f.tree().clone();
    let depth = tree.depth();
    let mut nodes: Vec<NodeData> = f.nodes().to_vec();
    if depth == 0 {
        return HssFactorization::new(tree, false, HssForm::Orthonormal, nodes);
    }

    let mut tmp_u: Vec<Option<DenseMatrix>> = vec![None; tree.node_count()];
    let mut tmp_v: Vec<Option<DenseMatrix>> = vec![None; tree.node_count()];
    for leaf in tree.leaves() {
        tmp_u[leaf.flat_index()] = Some(f.basis_u(leaf).clone());
        tmp_v[leaf.flat_index()] = Some(f.basis_v(leaf).clone());
    }

    for level in (0..depth).rev() {
        for node in tree.nodes_at_level(level) {
            let (c1, c2) = node.children();
            let (wu1, ru1) = qr_factor(&tmp_u[c1.flat_index()].take().expect("basis"))?;
            let (wu2, ru2) = qr_factor(&tmp_u[c2.flat_index()].take().expect("basis"))?;
            let (wv1, rv1) = qr_factor(&tmp_v[c1.flat_index()].take().expect("basis"))?;
            let (wv2, rv2) = qr_factor(&tmp_v[c2.flat_index()].take().expect("basis"))?;

            let b12 = f.coupling_12(node).to_dense();
            let b21 = f.coupling_21(node).to_dense();
            let rot12 = ru1.matmul(&b12).matmul_t(&rv2);
            let rot21 = ru2.matmul(&b21).matmul_t(&rv1);
            let (wt12u, s12, wt12v) = svd_full(&rot12);
            let (wt21u, s21, wt21v) = svd_full(&rot21);

            nodes[c1.flat_index()].basis_u = Some(wu1.matmul(&wt12u));
            nodes[c2.flat_index()].basis_v = Some(wv2.matmul(&wt12v));
            nodes[c2.flat_index()].basis_u = Some(wu2.matmul(&wt21u));
            nodes[c1.flat_index()].basis_v = Some(wv1.matmul(&wt21v));
            nodes[node.flat_index()].coupling = Some((
                Coupling::Diagonal {
                    rows: rot12.rows(),
                    cols: rot12.cols(),
                    values: s12,
                },
                Some(Coupling::Diagonal {
                    rows: rot21.rows(),
                    cols: rot21.cols(),
                    values: s21,
                }),
            ));

            if level > 0 {
                let u_hat = f.basis_u(node);
                let (u_top, u_bottom) = split_rows(u_hat, f.row_rank(c1));
                tmp_u[node.flat_index()] = Some(DenseMatrix::vstack(&[
                    &wt12u.t_matmul(&ru1).matmul(&u_top),
                    &wt21u.t_matmul(&ru2).matmul(&u_bottom),
                ]));
                let v_hat = f.basis_v(node);
                let (v_top, v_bottom) = split_rows(v_hat, f.col_rank(c1));
                tmp_v[node.flat_index()] = Some(DenseMatrix::vstack(&[
                    &wt21v.t_matmul(&rv1).matmul(&v_top),
                    &wt12v.t_matmul(&rv2).matmul(&v_bottom),
                ]));
            }
        }
    }

    clear_skeletons(&mut nodes);
    HssFactorization::new(tree, false, HssForm::Orthonormal, nodes)
}

/// Dispatch on the storage convention.
pub fn orthonormalize_any(f: &HssFactorization) -> Result<HssFactorization> {
    if f.is_symmetric() {
        orthonormalize(f)
    } else {
        orthonormalize_nonsymmetric(f)
    }
}
