//! The hierarchical factorization container shared by the compressor, the
//! apply/reconstruction routines and the orthonormalization pass.

use crate::dense::DenseMatrix;
use crate::error::{HssError, Result};
use crate::tree::{HssTree, NodeId};

/// Which basis convention the factorization is in.
///
/// `Interpolatory` bases embed an identity submatrix on the skeleton rows and
/// every coupling block is a literal submatrix of the source matrix.
/// `Orthonormal` is the post-processed form: column-orthonormal bases and
/// structurally diagonal couplings. `General` covers anything else that still
/// satisfies the telescoping identity, e.g. synthetically generated ground
/// truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HssForm {
    Interpolatory,
    Orthonormal,
    General,
}

/// Sibling-coupling block. The orthonormalized form stores the diagonal as a
/// vector so diagonality is structural rather than a numerical accident.
#[derive(Debug, Clone, PartialEq)]
pub enum Coupling {
    Dense(DenseMatrix),
    Diagonal {
        rows: usize,
        cols: usize,
        values: Vec<f64>,
    },
}

impl Coupling {
    pub fn rows(&self) -> usize {
        match self {
            Coupling::Dense(m) => m.rows(),
            Coupling::Diagonal { rows, .. } => *rows,
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Coupling::Dense(m) => m.cols(),
            Coupling::Diagonal { cols, .. } => *cols,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Coupling::Dense(m) => m.clone(),
            Coupling::Diagonal { rows, cols, values } => {
                let mut m = DenseMatrix::zeros(*rows, *cols);
                for (i, &v) in values.iter().enumerate() {
                    m.set(i, i, v);
                }
                m
            }
        }
    }

    pub fn transpose(&self) -> Coupling {
        match self {
            Coupling::Dense(m) => Coupling::Dense(m.transpose()),
            Coupling::Diagonal { rows, cols, values } => Coupling::Diagonal {
                rows: *cols,
                cols: *rows,
                values: values.clone(),
            },
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Coupling::Dense(m) => m.matvec(x),
            Coupling::Diagonal { rows, values, .. } => {
                let mut out = vec![0.0; *rows];
                for (i, &v) in values.iter().enumerate() {
                    out[i] = v * x[i];
                }
                out
            }
        }
    }

    pub fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Coupling::Dense(m) => m.t_matvec(x),
            Coupling::Diagonal { cols, values, .. } => {
                let mut out = vec![0.0; *cols];
                for (i, &v) in values.iter().enumerate() {
                    out[i] = v * x[i];
                }
                out
            }
        }
    }

    pub fn stored_scalars(&self) -> usize {
        match self {
            Coupling::Dense(m) => m.rows() * m.cols(),
            Coupling::Diagonal { values, .. } => values.len(),
        }
    }
}

/// Per-node payload. Leaves carry diagonal blocks, non-leaf nodes carry the
/// coupling blocks of their child sibling pair, and every node except the
/// root carries a row basis (plus a column basis when the factorization is
/// not stored in the symmetric convention).
#[derive(Debug, Clone, Default)]
pub struct NodeData {
    /// Row-space basis: `|I| x k_row` at leaves, `(k_row(c1)+k_row(c2)) x
    /// k_row` at inner nodes. `None` at the root.
    pub basis_u: Option<DenseMatrix>,
    /// Column-space basis; `None` in the symmetric convention (shared with
    /// `basis_u`) and at the root.
    pub basis_v: Option<DenseMatrix>,
    /// Global row indices whose rows span this node's off-diagonal row block
    /// (interpolatory form only; empty otherwise).
    pub row_skeleton: Vec<usize>,
    /// Global column indices for the column block; equals `row_skeleton` in
    /// the symmetric convention.
    pub col_skeleton: Vec<usize>,
    /// Diagonal block, leaves only.
    pub diag: Option<DenseMatrix>,
    /// Coupling between this node's children `(B_12, B_21)`; `B_21` is
    /// `None` in the symmetric convention where it equals `B_12^t`.
    pub coupling: Option<(Coupling, Option<Coupling>)>,
}

/// A hierarchical factorization over a binary index tree.
#[derive(Debug, Clone)]
pub struct HssFactorization {
    tree: HssTree,
    symmetric: bool,
    form: HssForm,
    nodes: Vec<NodeData>,
}

impl HssFactorization {
    pub fn new(
        tree: HssTree,
        symmetric: bool,
        form: HssForm,
        nodes: Vec<NodeData>,
    ) -> Result<Self> {
        let f = HssFactorization {
            tree,
            symmetric,
            form,
            nodes,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn n(&self) -> usize {
        self.tree.n()
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    pub fn tree(&self) -> &HssTree {
        &self.tree
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn form(&self) -> HssForm {
        self.form
    }

    pub fn node(&self, id: NodeId) -> &NodeData {
        &self.nodes[id.flat_index()]
    }

    pub fn nodes(&self) -> &[NodeData] {
        &self.nodes
    }

    /// Row basis of a non-root node.
    pub fn basis_u(&self, id: NodeId) -> &DenseMatrix {
        self.node(id)
            .basis_u
            .as_ref()
            .expect("non-root node must carry a row basis")
    }

    /// Column basis of a non-root node (the row basis in the symmetric
    /// convention).
    pub fn basis_v(&self, id: NodeId) -> &DenseMatrix {
        let node = self.node(id);
        node.basis_v
            .as_ref()
            .or(node.basis_u.as_ref())
            .expect("non-root node must carry a column basis")
    }

    pub fn row_rank(&self, id: NodeId) -> usize {
        self.node(id).basis_u.as_ref().map_or(0, |u| u.cols())
    }

    pub fn col_rank(&self, id: NodeId) -> usize {
        let node = self.node(id);
        node.basis_v
            .as_ref()
            .or(node.basis_u.as_ref())
            .map_or(0, |v| v.cols())
    }

    pub fn diag_block(&self, id: NodeId) -> &DenseMatrix {
        self.node(id).diag.as_ref().expect("leaf diagonal block")
    }

    /// Coupling `B_12` of `id`'s children.
    pub fn coupling_12(&self, id: NodeId) -> &Coupling {
        &self.node(id).coupling.as_ref().expect("inner coupling").0
    }

    /// Coupling `B_21` of `id`'s children; materialized from `B_12^t` in the
    /// symmetric convention.
    pub fn coupling_21(&self, id: NodeId) -> Coupling {
        let (b12, b21) = self.node(id).coupling.as_ref().expect("inner coupling");
        match b21 {
            Some(b) => b.clone(),
            None => b12.transpose(),
        }
    }

    /// Largest row/column rank over all non-root nodes.
    pub fn max_rank(&self) -> usize {
        let mut best = 0;
        for level in 1..=self.depth() {
            for node in self.tree.nodes_at_level(level) {
                best = best.max(self.row_rank(node)).max(self.col_rank(node));
            }
        }
        best
    }

    /// Structural consistency: basis shapes chain across levels, leaf blocks
    /// are square on their intervals and coupling shapes match child ranks.
    pub fn validate(&self) -> Result<()> {
        let depth = self.tree.depth();
        if self.nodes.len() != self.tree.node_count() {
            return Err(HssError::InvalidInput(format!(
                "{} node records for a tree of {} nodes",
                self.nodes.len(),
                self.tree.node_count()
            )));
        }
        for level in (0..=depth).rev() {
            for id in self.tree.nodes_at_level(level) {
                let node = self.node(id);
                let is_leaf = self.tree.is_leaf(id);
                let m = self.tree.node_size(id)?;

                if is_leaf {
                    let d = node.diag.as_ref().ok_or_else(|| {
                        HssError::InvalidInput(format!(
                            "leaf ({},{}) missing diagonal block",
                            id.level, id.pos
                        ))
                    })?;
                    if d.rows() != m || d.cols() != m {
                        return Err(HssError::InvalidInput(format!(
                            "leaf ({},{}) diagonal block is {}x{}, interval has {} indices",
                            id.level,
                            id.pos,
                            d.rows(),
                            d.cols(),
                            m
                        )));
                    }
                } else if depth > 0 {
                    let (c1, c2) = id.children();
                    let (b12, b21) = node.coupling.as_ref().ok_or_else(|| {
                        HssError::InvalidInput(format!(
                            "inner node ({},{}) missing coupling",
                            id.level, id.pos
                        ))
                    })?;
                    let want = (self.row_rank(c1), self.col_rank(c2));
                    if (b12.rows(), b12.cols()) != want {
                        return Err(HssError::InvalidInput(format!(
                            "coupling B12 at ({},{}) is {}x{}, child ranks give {}x{}",
                            id.level,
                            id.pos,
                            b12.rows(),
                            b12.cols(),
                            want.0,
                            want.1
                        )));
                    }
                    if let Some(b21) = b21 {
                        let want = (self.row_rank(c2), self.col_rank(c1));
                        if (b21.rows(), b21.cols()) != want {
                            return Err(HssError::InvalidInput(format!(
                                "coupling B21 at ({},{}) has inconsistent shape",
                                id.level, id.pos
                            )));
                        }
                    } else if !self.symmetric {
                        return Err(HssError::InvalidInput(
                            "non-symmetric factorization missing B21 blocks".into(),
                        ));
                    }
                }

                if id.level > 0 {
                    let expected_rows = if is_leaf {
                        m
                    } else {
                        let (c1, c2) = id.children();
                        self.row_rank(c1) + self.row_rank(c2)
                    };
                    let u = node.basis_u.as_ref().ok_or_else(|| {
                        HssError::InvalidInput(format!(
                            "node ({},{}) missing row basis",
                            id.level, id.pos
                        ))
                    })?;
                    if u.rows() != expected_rows {
                        return Err(HssError::InvalidInput(format!(
                            "row basis at ({},{}) has {} rows, expected {}",
                            id.level,
                            id.pos,
                            u.rows(),
                            expected_rows
                        )));
                    }
                    if let Some(v) = &node.basis_v {
                        let expected_rows = if is_leaf {
                            m
                        } else {
                            let (c1, c2) = id.children();
                            self.col_rank(c1) + self.col_rank(c2)
                        };
                        if v.rows() != expected_rows {
                            return Err(HssError::InvalidInput(format!(
                                "column basis at ({},{}) has {} rows, expected {}",
                                id.level,
                                id.pos,
                                v.rows(),
                                expected_rows
                            )));
                        }
                    } else if !self.symmetric {
                        return Err(HssError::InvalidInput(
                            "non-symmetric factorization missing column bases".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}
