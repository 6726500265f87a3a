//! Randomized hierarchical compression from black-box matvec and entry
//! access.
//!
//! The whole matrix is probed once with a Gaussian sample, `S = A R`. The
//! sweep then walks the tree from the leaves up, peeling the already-known
//! diagonal contribution out of the sample at each level (downdating), so
//! every node sees a local sample of exactly its off-diagonal block. Row
//! selections come from interpolative decompositions of the local samples,
//! which keeps every coupling block a literal submatrix of the source
//! matrix.
//!
//! In the non-symmetric sweep two samples are maintained: `S_r = A R_u`
//! probing the row blocks' column spaces and `S_c = A^t R_v` probing the
//! column blocks' row spaces. The compressed probe `R_u` of a node lives in
//! its *column*-skeleton coordinates (and `R_v` in the row-skeleton ones):
//! downdating a row sample against a sibling needs `A(skel_row, I_sib)`,
//! which factors through the sibling's column interpolation.

use std::time::Instant;

use crate::dense::DenseMatrix;
use crate::error::{HssError, Result};
use crate::factorization::{Coupling, HssFactorization, HssForm, NodeData};
use crate::linalg::{interpolate_fixed, interpolate_tol_checked, InterpolativeDecomposition};
use crate::rng::GaussianSource;
use crate::source::MatrixAccessor;
use crate::tree::{build_uniform_tree, HssTree, NodeId};

/// Fixed-rank or tolerance-driven compression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompressionMode {
    FixedRank(usize),
    Tolerance {
        eps: f64,
        /// When set, `eps` is scaled by a Frobenius-norm estimate of the
        /// matrix taken from the initial sample (`|S|_F / sqrt(l)`).
        relative: bool,
    },
}

/// Knobs of a compression run.
#[derive(Debug, Clone)]
pub struct CompressionConfig {
    pub mode: CompressionMode,
    /// Extra sample columns beyond the target rank; drives the failure
    /// probability of the randomized range probe. Default 10.
    pub oversampling: usize,
    pub seed: u64,
    pub max_leaf: usize,
    /// Tolerance mode sizes the sample as `sample_rank + oversampling`;
    /// defaults to `max_leaf` when unset. Fixed-rank mode ignores it.
    pub sample_rank: Option<usize>,
    /// Worker threads for the per-level node loop; 0 or 1 runs serially.
    /// Results are bitwise independent of the thread count.
    pub threads: usize,
}

impl CompressionConfig {
    pub fn new(mode: CompressionMode) -> Self {
        CompressionConfig {
            mode,
            oversampling: 10,
            seed: 0,
            max_leaf: 64,
            sample_rank: None,
            threads: 0,
        }
    }

    pub fn fixed_rank(k: usize) -> Self {
        Self::new(CompressionMode::FixedRank(k))
    }

    pub fn tolerance(eps: f64) -> Self {
        Self::new(CompressionMode::Tolerance {
            eps,
            relative: false,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_leaf(mut self, max_leaf: usize) -> Self {
        self.max_leaf = max_leaf;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.oversampling < 1 {
            return Err(HssError::InvalidArgument(
                "oversampling must be at least 1".into(),
            ));
        }
        if self.max_leaf < 2 {
            return Err(HssError::InvalidArgument("max_leaf must be at least 2".into()));
        }
        match self.mode {
            CompressionMode::FixedRank(k) if k < 1 => {
                Err(HssError::InvalidArgument("fixed rank must be at least 1".into()))
            }
            CompressionMode::Tolerance { eps, .. } if !(eps > 0.0) || !eps.is_finite() => {
                Err(HssError::InvalidArgument(format!(
                    "tolerance must be positive and finite, got {eps}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Number of random sample columns `l`.
    pub fn sample_width(&self) -> usize {
        match self.mode {
            CompressionMode::FixedRank(k) => k + self.oversampling,
            CompressionMode::Tolerance { .. } => {
                self.sample_rank.unwrap_or(self.max_leaf) + self.oversampling
            }
        }
    }
}

/// Wall-clock phase split of one compression run.
#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct PhaseTimings {
    /// Random matrix generation plus the sample matvecs.
    pub sampling_ms: f64,
    /// The level-by-level sweep (entry evaluations, downdates, IDs).
    pub sweep_ms: f64,
    /// Root coupling and final container assembly.
    pub assembly_ms: f64,
}

impl PhaseTimings {
    pub fn total_ms(&self) -> f64 {
        self.sampling_ms + self.sweep_ms + self.assembly_ms
    }
}

// --------------------------------------------------------------------------
// Shared sweep machinery
// --------------------------------------------------------------------------

struct NodeState {
    skel_row: Vec<usize>,
    skel_col: Vec<usize>,
    s_row: DenseMatrix,
    s_col: DenseMatrix,
    r_u: DenseMatrix,
    r_v: DenseMatrix,
}

struct NodeOutput {
    node: NodeId,
    data: NodeData,
    state: NodeState,
    flops: u64,
}

#[derive(Clone, Copy)]
enum LocalMode {
    Fixed(usize),
    Tol(f64),
}

/// One node's interpolation: ID of the transposed local sample, with the
/// rank-overflow guard. Returns the basis (coefficients transposed), the
/// local pivot positions and the residual.
fn interpolate_sample(
    s_loc: &DenseMatrix,
    mode: LocalMode,
    width: usize,
    node: NodeId,
) -> Result<(DenseMatrix, InterpolativeDecomposition)> {
    let m_loc = s_loc.rows();
    let st = s_loc.transpose();
    let id = match mode {
        LocalMode::Fixed(k) => interpolate_fixed(&st, k.min(m_loc).min(width))?,
        LocalMode::Tol(eps) => {
            let (id, tol_satisfied) = interpolate_tol_checked(&st, eps)?;
            // The sample certifies ranks only up to its width: if the block
            // has more rows than the probe has columns and the sweep ran
            // out of pivots before the tolerance stop fired, the true rank
            // exceeds what the probe can see.
            if width < m_loc && id.rank() == width && !tol_satisfied {
                return Err(HssError::RankDeficient {
                    level: node.level,
                    pos: node.pos,
                    width,
                    residual: id.residual,
                    tol: eps,
                });
            }
            id
        }
    };
    Ok((id.coeff.transpose(), id))
}

fn run_level<F>(nodes: Vec<NodeId>, pool: Option<&rayon::ThreadPool>, f: F) -> Result<Vec<NodeOutput>>
where
    F: Fn(NodeId) -> Result<NodeOutput> + Sync,
{
    match pool {
        Some(pool) => pool.install(|| {
            use rayon::prelude::*;
            nodes.par_iter().map(|&id| f(id)).collect()
        }),
        None => nodes.into_iter().map(f).collect(),
    }
}

fn build_pool(threads: usize) -> Result<Option<rayon::ThreadPool>> {
    if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| HssError::InvalidArgument(format!("thread pool: {e}")))?;
        Ok(Some(pool))
    } else {
        Ok(None)
    }
}

/// Column-by-column sample `A R` (or `A^t R`), one counted matvec per column.
fn sample_matrix(acc: &MatrixAccessor, r: &DenseMatrix, transpose: bool) -> DenseMatrix {
    let n = acc.n();
    let l = r.cols();
    let mut s = DenseMatrix::zeros(n, l);
    for j in 0..l {
        let x = r.col_vec(j);
        let col = if transpose {
            acc.transpose_matvec(&x)
        } else {
            acc.matvec(&x)
        };
        for i in 0..n {
            s.set(i, j, col[i]);
        }
    }
    s
}

fn tolerance_scale(eps: f64, relative: bool, sample: &DenseMatrix) -> f64 {
    if relative {
        eps * sample.frob_norm() / (sample.cols() as f64).sqrt()
    } else {
        eps
    }
}

/// Rough flop tally for one node of the sweep (downdates, pivoted QR of the
/// sample, probe compression); an estimate, not a measurement.
fn sweep_flop_estimate(m_loc: usize, l: usize, k: usize) -> u64 {
    let (m, l, k) = (m_loc as u64, l as u64, k as u64);
    2 * m * m * l + 2 * l * m * m.min(l) + 2 * m * l * k
}

/// Degenerate depth-0 factorization: the matrix is stored densely as the
/// root diagonal block; no sampling is performed.
fn trivial_factorization(acc: &MatrixAccessor, symmetric: bool) -> Result<HssFactorization> {
    let tree = HssTree::with_depth(acc.n(), 0)?;
    let node = NodeData {
        diag: Some(acc.materialize()),
        ..NodeData::default()
    };
    HssFactorization::new(tree, symmetric, HssForm::Interpolatory, vec![node])
}

// --------------------------------------------------------------------------
// Symmetric compression
// --------------------------------------------------------------------------

/// Compress a symmetric matrix. Performs exactly `sample_width()` matvecs on
/// the accessor; entry evaluations stay within the leaf diagonals plus one
/// skeleton cross block per sibling pair.
pub fn compress_symmetric(
    acc: &MatrixAccessor,
    cfg: &CompressionConfig,
) -> Result<HssFactorization> {
    compress_symmetric_timed(acc, cfg).map(|(f, _)| f)
}

/// [`compress_symmetric`] with wall-clock phase timings.
pub fn compress_symmetric_timed(
    acc: &MatrixAccessor,
    cfg: &CompressionConfig,
) -> Result<(HssFactorization, PhaseTimings)> {
    cfg.validate()?;
    if !acc.is_symmetric() {
        return Err(HssError::InvalidInput(
            "compress_symmetric requires a symmetric accessor".into(),
        ));
    }
    let n = acc.n();
    if n < 2 {
        return Err(HssError::InvalidInput("compression requires n >= 2".into()));
    }
    let tree = build_uniform_tree(n, cfg.max_leaf)?;
    let mut timings = PhaseTimings::default();
    if tree.depth() == 0 {
        let t0 = Instant::now();
        let f = trivial_factorization(acc, true)?;
        timings.assembly_ms = t0.elapsed().as_secs_f64() * 1e3;
        return Ok((f, timings));
    }
    let l = cfg.sample_width();
    let depth = tree.depth();
    let pool = build_pool(cfg.threads)?;

    let t0 = Instant::now();
    let mut rng = GaussianSource::from_seed(cfg.seed);
    let r = rng.matrix(n, l);
    acc.record_rng_draws((n * l) as u64);
    let s = sample_matrix(acc, &r, false);
    timings.sampling_ms = t0.elapsed().as_secs_f64() * 1e3;

    let local_mode = match cfg.mode {
        CompressionMode::FixedRank(k) => LocalMode::Fixed(k),
        CompressionMode::Tolerance { eps, relative } => {
            LocalMode::Tol(tolerance_scale(eps, relative, &s))
        }
    };

    let t1 = Instant::now();
    let mut states: Vec<Option<NodeState>> = (0..tree.node_count()).map(|_| None).collect();
    let mut nodes: Vec<NodeData> = (0..tree.node_count()).map(|_| NodeData::default()).collect();

    for level in (1..=depth).rev() {
        let level_nodes: Vec<NodeId> = tree.nodes_at_level(level).collect();
        let outputs = run_level(level_nodes, pool.as_ref(), |node| {
            let mut data = NodeData::default();
            let (i_loc, r_loc, s_loc): (Vec<usize>, DenseMatrix, DenseMatrix) =
                if tree.is_leaf(node) {
                    let iv = tree.interval(node)?;
                    let d = acc.entries(
                        &iv.clone().collect::<Vec<_>>(),
                        &iv.clone().collect::<Vec<_>>(),
                    );
                    let r_loc = r.rows_range(iv.clone());
                    let s_loc = s.rows_range(iv.clone()).sub(&d.matmul(&r_loc));
                    data.diag = Some(d);
                    (iv.collect(), r_loc, s_loc)
                } else {
                    let (c1, c2) = node.children();
                    let st1 = states[c1.flat_index()].as_ref().expect("child state");
                    let st2 = states[c2.flat_index()].as_ref().expect("child state");
                    let b12 = acc.entries(&st1.skel_row, &st2.skel_row);
                    let s_top = st1.s_row.sub(&b12.matmul(&st2.r_u));
                    let s_bot = st2.s_row.sub(&b12.t_matmul(&st1.r_u));
                    let i_loc: Vec<usize> = st1
                        .skel_row
                        .iter()
                        .chain(&st2.skel_row)
                        .copied()
                        .collect();
                    let r_loc = DenseMatrix::vstack(&[&st1.r_u, &st2.r_u]);
                    let s_loc = DenseMatrix::vstack(&[&s_top, &s_bot]);
                    data.coupling = Some((Coupling::Dense(b12), None));
                    (i_loc, r_loc, s_loc)
                };

            let m_loc = s_loc.rows();
            let (u_hat, id) = interpolate_sample(&s_loc, local_mode, l, node)?;
            let skel: Vec<usize> = id.skeleton.iter().map(|&j| i_loc[j]).collect();
            let r_t = u_hat.t_matmul(&r_loc);
            let s_t = s_loc.select_rows(&id.skeleton);
            let flops = sweep_flop_estimate(m_loc, l, id.rank());

            data.basis_u = Some(u_hat);
            data.row_skeleton = skel.clone();
            data.col_skeleton = skel.clone();
            Ok(NodeOutput {
                node,
                data,
                state: NodeState {
                    skel_row: skel.clone(),
                    skel_col: skel,
                    s_row: s_t,
                    s_col: DenseMatrix::zeros(0, 0),
                    r_u: r_t,
                    r_v: DenseMatrix::zeros(0, 0),
                },
                flops,
            })
        })?;
        for out in outputs {
            acc.record_flops(out.flops);
            nodes[out.node.flat_index()] = out.data;
            states[out.node.flat_index()] = Some(out.state);
        }
    }
    timings.sweep_ms = t1.elapsed().as_secs_f64() * 1e3;

    let t2 = Instant::now();
    let (c1, c2) = NodeId::ROOT.children();
    let skel1 = &states[c1.flat_index()].as_ref().unwrap().skel_row;
    let skel2 = &states[c2.flat_index()].as_ref().unwrap().skel_row;
    let b_root = acc.entries(skel1, skel2);
    nodes[NodeId::ROOT.flat_index()].coupling = Some((Coupling::Dense(b_root), None));
    let f = HssFactorization::new(tree, true, HssForm::Interpolatory, nodes)?;
    timings.assembly_ms = t2.elapsed().as_secs_f64() * 1e3;
    Ok((f, timings))
}

// --------------------------------------------------------------------------
// Non-symmetric compression
// --------------------------------------------------------------------------

/// Compress a general square matrix. Performs exactly `sample_width()`
/// matvecs plus the same number of transpose matvecs.
pub fn compress_nonsymmetric(
    acc: &MatrixAccessor,
    cfg: &CompressionConfig,
) -> Result<HssFactorization> {
    compress_nonsymmetric_timed(acc, cfg).map(|(f, _)| f)
}

/// [`compress_nonsymmetric`] with wall-clock phase timings.
pub fn compress_nonsymmetric_timed(
    acc: &MatrixAccessor,
    cfg: &CompressionConfig,
) -> Result<(HssFactorization, PhaseTimings)> {
    cfg.validate()?;
    let n = acc.n();
    if n < 2 {
        return Err(HssError::InvalidInput("compression requires n >= 2".into()));
    }
    let tree = build_uniform_tree(n, cfg.max_leaf)?;
    let mut timings = PhaseTimings::default();
    if tree.depth() == 0 {
        let t0 = Instant::now();
        let f = trivial_factorization(acc, false)?;
        timings.assembly_ms = t0.elapsed().as_secs_f64() * 1e3;
        return Ok((f, timings));
    }
    let l = cfg.sample_width();
    let depth = tree.depth();
    let pool = build_pool(cfg.threads)?;

    let t0 = Instant::now();
    let mut rng = GaussianSource::from_seed(cfg.seed);
    let r_u = rng.matrix(n, l);
    let r_v = rng.matrix(n, l);
    acc.record_rng_draws(2 * (n * l) as u64);
    let s_r = sample_matrix(acc, &r_u, false);
    let s_c = sample_matrix(acc, &r_v, true);
    timings.sampling_ms = t0.elapsed().as_secs_f64() * 1e3;

    let (row_mode, col_mode) = match cfg.mode {
        CompressionMode::FixedRank(k) => (LocalMode::Fixed(k), LocalMode::Fixed(k)),
        CompressionMode::Tolerance { eps, relative } => (
            LocalMode::Tol(tolerance_scale(eps, relative, &s_r)),
            LocalMode::Tol(tolerance_scale(eps, relative, &s_c)),
        ),
    };

    let t1 = Instant::now();
    let mut states: Vec<Option<NodeState>> = (0..tree.node_count()).map(|_| None).collect();
    let mut nodes: Vec<NodeData> = (0..tree.node_count()).map(|_| NodeData::default()).collect();

    for level in (1..=depth).rev() {
        let level_nodes: Vec<NodeId> = tree.nodes_at_level(level).collect();
        let outputs = run_level(level_nodes, pool.as_ref(), |node| {
            let mut data = NodeData::default();
            let (irow_loc, icol_loc, ru_loc, rv_loc, sr_loc, sc_loc) = if tree.is_leaf(node) {
                let iv = tree.interval(node)?;
                let idx: Vec<usize> = iv.clone().collect();
                let d = acc.entries(&idx, &idx);
                let ru_loc = r_u.rows_range(iv.clone());
                let rv_loc = r_v.rows_range(iv.clone());
                let sr_loc = s_r.rows_range(iv.clone()).sub(&d.matmul(&ru_loc));
                let sc_loc = s_c.rows_range(iv.clone()).sub(&d.t_matmul(&rv_loc));
                data.diag = Some(d);
                (idx.clone(), idx, ru_loc, rv_loc, sr_loc, sc_loc)
            } else {
                let (c1, c2) = node.children();
                let st1 = states[c1.flat_index()].as_ref().expect("child state");
                let st2 = states[c2.flat_index()].as_ref().expect("child state");
                let b12 = acc.entries(&st1.skel_row, &st2.skel_col);
                let b21 = acc.entries(&st2.skel_row, &st1.skel_col);
                let sr_loc = DenseMatrix::vstack(&[
                    &st1.s_row.sub(&b12.matmul(&st2.r_u)),
                    &st2.s_row.sub(&b21.matmul(&st1.r_u)),
                ]);
                let sc_loc = DenseMatrix::vstack(&[
                    &st1.s_col.sub(&b21.t_matmul(&st2.r_v)),
                    &st2.s_col.sub(&b12.t_matmul(&st1.r_v)),
                ]);
                let irow_loc: Vec<usize> =
                    st1.skel_row.iter().chain(&st2.skel_row).copied().collect();
                let icol_loc: Vec<usize> =
                    st1.skel_col.iter().chain(&st2.skel_col).copied().collect();
                let ru_loc = DenseMatrix::vstack(&[&st1.r_u, &st2.r_u]);
                let rv_loc = DenseMatrix::vstack(&[&st1.r_v, &st2.r_v]);
                data.coupling = Some((Coupling::Dense(b12), Some(Coupling::Dense(b21))));
                (irow_loc, icol_loc, ru_loc, rv_loc, sr_loc, sc_loc)
            };

            let (u_hat, row_id) = interpolate_sample(&sr_loc, row_mode, l, node)?;
            let (v_hat, col_id) = interpolate_sample(&sc_loc, col_mode, l, node)?;
            let skel_row: Vec<usize> = row_id.skeleton.iter().map(|&j| irow_loc[j]).collect();
            let skel_col: Vec<usize> = col_id.skeleton.iter().map(|&j| icol_loc[j]).collect();
            // The probes cross sides: the row sample's probe is compressed
            // by the column interpolation and vice versa.
            let r_u_t = v_hat.t_matmul(&ru_loc);
            let r_v_t = u_hat.t_matmul(&rv_loc);
            let s_row_t = sr_loc.select_rows(&row_id.skeleton);
            let s_col_t = sc_loc.select_rows(&col_id.skeleton);
            let flops = sweep_flop_estimate(sr_loc.rows(), l, row_id.rank())
                + sweep_flop_estimate(sc_loc.rows(), l, col_id.rank());

            data.basis_u = Some(u_hat);
            data.basis_v = Some(v_hat);
            data.row_skeleton = skel_row.clone();
            data.col_skeleton = skel_col.clone();
            Ok(NodeOutput {
                node,
                data,
                state: NodeState {
                    skel_row,
                    skel_col,
                    s_row: s_row_t,
                    s_col: s_col_t,
                    r_u: r_u_t,
                    r_v: r_v_t,
                },
                flops,
            })
        })?;
        for out in outputs {
            acc.record_flops(out.flops);
            nodes[out.node.flat_index()] = out.data;
            states[out.node.flat_index()] = Some(out.state);
        }
    }
    timings.sweep_ms = t1.elapsed().as_secs_f64() * 1e3;

    let t2 = Instant::now();
    let (c1, c2) = NodeId::ROOT.children();
    let st1 = states[c1.flat_index()].as_ref().unwrap();
    let st2 = states[c2.flat_index()].as_ref().unwrap();
    let b12 = acc.entries(&st1.skel_row, &st2.skel_col);
    let b21 = acc.entries(&st2.skel_row, &st1.skel_col);
    nodes[NodeId::ROOT.flat_index()].coupling =
        Some((Coupling::Dense(b12), Some(Coupling::Dense(b21))));
    let f = HssFactorization::new(tree, false, HssForm::Interpolatory, nodes)?;
    timings.assembly_ms = t2.elapsed().as_secs_f64() * 1e3;
    Ok((f, timings))
}

// --------------------------------------------------------------------------
// Two-sided interpolative factorization of a globally low-rank matrix
// --------------------------------------------------------------------------

/// `A ~ x_col * A(j_col, j_row) * x_row^t`: both factors are interpolation
/// coefficient matrices and the core is a literal `k x k` submatrix.
#[derive(Debug, Clone)]
pub struct TwoSidedId {
    pub x_col: DenseMatrix,
    pub j_col: Vec<usize>,
    pub j_row: Vec<usize>,
    pub x_row: DenseMatrix,
}

impl TwoSidedId {
    /// Materialize the approximation using entry access on the accessor.
    pub fn reconstruct(&self, acc: &MatrixAccessor) -> DenseMatrix {
        let core = acc.entries(&self.j_col, &self.j_row);
        self.x_col.matmul(&core).matmul(&self.x_row.transpose())
    }
}

/// Two-sided ID of a numerically rank-`k` matrix via one round of
/// randomized sampling on each side (`k + 10` probes per side).
pub fn two_sided_id_factor(acc: &MatrixAccessor, k: usize, seed: u64) -> Result<TwoSidedId> {
    let n = acc.n();
    if k < 1 || k > n {
        return Err(HssError::InvalidArgument(format!(
            "two-sided ID rank must be in 1..={n}, got {k}"
        )));
    }
    let l = k + 10;
    let mut rng = GaussianSource::from_seed(seed);
    let r_col = rng.matrix(n, l);
    let r_row = rng.matrix(n, l);
    acc.record_rng_draws(2 * (n * l) as u64);
    let s_col = sample_matrix(acc, &r_col, false);
    let s_row = sample_matrix(acc, &r_row, true);

    let col_id = interpolate_fixed(&s_col.transpose(), k)?;
    let row_id = interpolate_fixed(&s_row.transpose(), k)?;
    if col_id.rank() < k || row_id.rank() < k {
        return Err(HssError::InvalidInput(format!(
            "sample rank {} below the requested rank {k}; the matrix rank is deficient",
            col_id.rank().min(row_id.rank())
        )));
    }
    Ok(TwoSidedId {
        x_col: col_id.coeff.transpose(),
        j_col: col_id.skeleton,
        j_row: row_id.skeleton,
        x_row: row_id.coeff.transpose(),
    })
}
