//! Dense low-rank factorization kernels: rank-revealing QR, truncated SVD
//! and the interpolative decomposition, in fixed-rank and tolerance-driven
//! forms.
//!
//! Everything here operates on small to mid-size blocks; the pivot rule is
//! largest remaining column norm with ties broken by lowest index, and all
//! remainders are measured in the Frobenius norm.

use crate::dense::DenseMatrix;
use crate::error::{HssError, Result};

/// Hard magnitude cap on interpolation coefficients. Pivoted QR keeps the
/// coefficients near 1; anything past this cap signals an ill-conditioned
/// selection and is reported as an error instead of propagated silently.
pub const ID_COEFF_CAP: f64 = 2.0;

/// When a coefficient exceeds this, the column selection is refined by
/// swapping the offending skeleton/non-skeleton pair before the hard cap is
/// checked. Each swap grows `|det R11|` by the coefficient's magnitude, so
/// the loop terminates; in practice greedy pivoting trips it on the order
/// of one interpolation in ten thousand.
const ID_REFINE_THRESHOLD: f64 = 1.9;

const ID_REFINE_MAX_SWAPS: usize = 64;

/// Interpolative decomposition `A ~ A(:, skeleton) * coeff`.
///
/// `coeff` is `k x n` and carries an exact `k x k` identity in the skeleton
/// columns. `residual` is the Frobenius norm of the trailing block left by
/// the pivoted sweep that produced the selection.
#[derive(Debug, Clone)]
pub struct InterpolativeDecomposition {
    pub skeleton: Vec<usize>,
    pub coeff: DenseMatrix,
    pub residual: f64,
}

impl InterpolativeDecomposition {
    pub fn rank(&self) -> usize {
        self.skeleton.len()
    }

    /// `A(:, skeleton) * coeff` for the matrix this was computed from.
    pub fn reconstruct(&self, a: &DenseMatrix) -> DenseMatrix {
        a.select_cols(&self.skeleton).matmul(&self.coeff)
    }
}

/// Truncated singular value decomposition `A ~ U diag(d) V^t`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DenseMatrix,
    pub d: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.d.len()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let mut ud = self.u.clone();
        for i in 0..ud.rows() {
            for (j, &s) in self.d.iter().enumerate() {
                ud.set(i, j, ud.get(i, j) * s);
            }
        }
        ud.matmul_t(&self.v)
    }
}

// ---------------------------------------------------------------------------
// Column-pivoted Householder QR
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub(crate) enum PivotStop {
    /// Stop when the largest remaining column norm falls to machine noise.
    MachineRank,
    /// Stop after `k` pivots (earlier on numerical rank collapse).
    Rank(usize),
    /// Stop once the trailing Frobenius norm is at most the tolerance.
    AbsTol(f64),
}

pub(crate) struct PivotedQr {
    /// Orthonormal basis, `m x rank`. Empty when `form_q` was false.
    pub q: DenseMatrix,
    /// Upper-trapezoidal factor `rank x n` in pivoted column order.
    pub r: DenseMatrix,
    /// `perm[j]` is the original index of pivoted column `j` (length `n`).
    pub perm: Vec<usize>,
    pub rank: usize,
    /// Exact Frobenius norm of the discarded trailing block.
    pub residual: f64,
    /// For `AbsTol` runs: whether the tolerance stop actually fired. False
    /// means the sweep ran out of pivots first — a full-width `rank` then
    /// says nothing about the tail beyond the sample (for `m <= n` the last
    /// pivot leaves no rows, so the residual is structurally zero).
    pub tol_satisfied: bool,
}

fn machine_rank_threshold_sq(m: usize, n: usize, max_colnorm2: f64) -> f64 {
    let dim = m.max(n) as f64;
    max_colnorm2 * (f64::EPSILON * dim) * (f64::EPSILON * dim)
}

/// Householder QR with column pivoting.
///
/// Column norms are tracked by downdating with exact recomputation on
/// cancellation; tolerance stops are confirmed against the exact trailing
/// norm before they are taken.
pub(crate) fn pivoted_qr(a: &DenseMatrix, stop: PivotStop, form_q: bool) -> PivotedQr {
    let (m, n) = (a.rows(), a.cols());
    let kmax = m.min(n);
    let mut work = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut betas: Vec<f64> = Vec::with_capacity(kmax);
    let mut rdiag: Vec<f64> = Vec::with_capacity(kmax);

    let mut colnorm2: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| work.get(i, j) * work.get(i, j)).sum())
        .collect();
    let mut colnorm_ref = colnorm2.clone();
    let init_max = colnorm2.iter().cloned().fold(0.0, f64::max);
    let machine_tol2 = machine_rank_threshold_sq(m, n, init_max);

    let exact_trailing = |work: &DenseMatrix, j: usize| -> Vec<f64> {
        (j..n)
            .map(|c| (j..m).map(|i| work.get(i, c) * work.get(i, c)).sum())
            .collect()
    };

    let mut rank = kmax;
    let mut tol_satisfied = !matches!(stop, PivotStop::AbsTol(_));
    let mut j = 0;
    while j < kmax {
        // Pivot: largest remaining column norm, lowest index on ties.
        let mut pivot = j;
        for c in (j + 1)..n {
            if colnorm2[c] > colnorm2[pivot] {
                pivot = c;
            }
        }

        let stop_here = match stop {
            PivotStop::MachineRank => colnorm2[pivot] <= machine_tol2,
            PivotStop::Rank(k) => j >= k || colnorm2[pivot] <= machine_tol2,
            PivotStop::AbsTol(tol) => {
                let est: f64 = colnorm2[j..].iter().sum();
                if est <= tol * tol {
                    // Downdated estimates drift; confirm before stopping.
                    let exact = exact_trailing(&work, j);
                    let exact_sum: f64 = exact.iter().sum();
                    for (off, v) in exact.into_iter().enumerate() {
                        colnorm2[j + off] = v;
                        colnorm_ref[j + off] = v;
                    }
                    if exact_sum <= tol * tol {
                        tol_satisfied = true;
                        true
                    } else {
                        // Estimates were refreshed; re-select the pivot.
                        pivot = j;
                        for c in (j + 1)..n {
                            if colnorm2[c] > colnorm2[pivot] {
                                pivot = c;
                            }
                        }
                        false
                    }
                } else {
                    false
                }
            }
        };
        if stop_here {
            rank = j;
            break;
        }

        if pivot != j {
            for i in 0..m {
                let t = work.get(i, j);
                work.set(i, j, work.get(i, pivot));
                work.set(i, pivot, t);
            }
            colnorm2.swap(j, pivot);
            colnorm_ref.swap(j, pivot);
            perm.swap(j, pivot);
        }

        // Householder reflector for column j, rows j..m.
        let sigma: f64 = ((j..m).map(|i| work.get(i, j) * work.get(i, j)).sum::<f64>()).sqrt();
        if sigma == 0.0 {
            rank = j;
            break;
        }
        let alpha = work.get(j, j);
        let r_jj = if alpha >= 0.0 { -sigma } else { sigma };
        let v0 = alpha - r_jj;
        work.set(j, j, v0);
        // v^t v = 2 sigma (sigma + |alpha|)
        let vtv = 2.0 * sigma * (sigma + alpha.abs());
        let beta = 2.0 / vtv;
        betas.push(beta);
        rdiag.push(r_jj);

        for c in (j + 1)..n {
            let dot: f64 = (j..m).map(|i| work.get(i, j) * work.get(i, c)).sum();
            let s = beta * dot;
            if s != 0.0 {
                for i in j..m {
                    let v = work.get(i, c) - s * work.get(i, j);
                    work.set(i, c, v);
                }
            }
            // Downdate the remaining norm by the new R entry.
            let rjc = work.get(j, c);
            let updated = (colnorm2[c] - rjc * rjc).max(0.0);
            if updated < 1e-8 * colnorm_ref[c] {
                let exact: f64 = ((j + 1)..m).map(|i| work.get(i, c) * work.get(i, c)).sum();
                colnorm2[c] = exact;
                colnorm_ref[c] = exact;
            } else {
                colnorm2[c] = updated;
            }
        }
        j += 1;
        if j == kmax {
            rank = kmax;
        }
    }

    let residual = exact_trailing(&work, rank).iter().sum::<f64>().sqrt();

    // Assemble R in pivoted column order.
    let mut r = DenseMatrix::zeros(rank, n);
    for i in 0..rank {
        r.set(i, i, rdiag[i]);
        for c in (i + 1)..n {
            r.set(i, c, work.get(i, c));
        }
    }

    // Accumulate Q = H_0 ... H_{rank-1} restricted to the leading columns.
    let mut q = DenseMatrix::zeros(if form_q { m } else { 0 }, if form_q { rank } else { 0 });
    if form_q {
        for i in 0..rank {
            q.set(i, i, 1.0);
        }
        for h in (0..rank).rev() {
            for c in 0..rank {
                let dot: f64 = (h..m).map(|i| work.get(i, h) * q.get(i, c)).sum();
                let s = betas[h] * dot;
                if s != 0.0 {
                    for i in h..m {
                        let v = q.get(i, c) - s * work.get(i, h);
                        q.set(i, c, v);
                    }
                }
            }
        }
        // Normalize to a nonnegative R diagonal.
        for i in 0..rank {
            if rdiag[i] < 0.0 {
                for c in 0..n {
                    r.set(i, c, -r.get(i, c));
                }
                for row in 0..m {
                    q.set(row, i, -q.get(row, i));
                }
            }
        }
    } else {
        for i in 0..rank {
            if rdiag[i] < 0.0 {
                for c in 0..n {
                    r.set(i, c, -r.get(i, c));
                }
            }
        }
    }

    PivotedQr {
        q,
        r,
        perm,
        rank,
        residual,
        tol_satisfied,
    }
}

/// Rank-revealing QR factorization: `A = Q R` with orthonormal `Q` columns
/// and `R` upper triangular up to a column permutation. The column count of
/// `Q` is the numerical rank of `A` at machine precision; a zero matrix
/// yields empty rank-0 factors.
pub fn qr_factor(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if !a.is_finite() {
        return Err(HssError::InvalidInput("qr_factor: non-finite input".into()));
    }
    let f = pivoted_qr(a, PivotStop::MachineRank, true);
    // Undo the pivoting so Q * R reproduces A in its original column order.
    let mut r = DenseMatrix::zeros(f.rank, a.cols());
    for c in 0..a.cols() {
        for i in 0..f.rank {
            r.set(i, f.perm[c], f.r.get(i, c));
        }
    }
    Ok((f.q, r))
}

/// `T = R11^{-1} R12` by back substitution on the leading `k x n` factor in
/// pivoted order. `None` if a diagonal entry vanished.
fn interpolation_coefficients(r: &DenseMatrix, k: usize, n: usize) -> Option<DenseMatrix> {
    let mut t = DenseMatrix::zeros(k, n - k);
    for c in k..n {
        let mut x = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = r.get(i, c);
            for (tt, &xt) in x.iter().enumerate().skip(i + 1) {
                s -= r.get(i, tt) * xt;
            }
            if r.get(i, i) == 0.0 {
                return None;
            }
            x[i] = s / r.get(i, i);
        }
        for (i, &xi) in x.iter().enumerate() {
            t.set(i, c - k, xi);
        }
    }
    Some(t)
}

/// `k`-step Householder triangularization of `a` with a fixed column order;
/// returns the `k x n` upper factor (in that order) and the exact trailing
/// Frobenius norm.
fn qr_fixed_order(a: &DenseMatrix, perm: &[usize], k: usize) -> (DenseMatrix, f64) {
    let m = a.rows();
    let n = perm.len();
    let mut work = a.select_cols(perm);
    for j in 0..k {
        let sigma: f64 = ((j..m).map(|i| work.get(i, j) * work.get(i, j)).sum::<f64>()).sqrt();
        if sigma == 0.0 {
            continue;
        }
        let alpha = work.get(j, j);
        let r_jj = if alpha >= 0.0 { -sigma } else { sigma };
        work.set(j, j, alpha - r_jj);
        let beta = 2.0 / (2.0 * sigma * (sigma + alpha.abs()));
        for c in (j + 1)..n {
            let dot: f64 = (j..m).map(|i| work.get(i, j) * work.get(i, c)).sum();
            let s = beta * dot;
            if s != 0.0 {
                for i in j..m {
                    let v = work.get(i, c) - s * work.get(i, j);
                    work.set(i, c, v);
                }
            }
        }
        work.set(j, j, r_jj);
    }
    let mut r = DenseMatrix::zeros(k, n);
    for i in 0..k {
        for c in i..n {
            r.set(i, c, work.get(i, c));
        }
    }
    let residual = (k..n)
        .map(|c| (k..m).map(|i| work.get(i, c) * work.get(i, c)).sum::<f64>())
        .sum::<f64>()
        .sqrt();
    (r, residual)
}

fn interpolate_from_pivoted(a: &DenseMatrix, f: PivotedQr) -> Result<InterpolativeDecomposition> {
    let n = a.cols();
    let k = f.rank;
    let mut perm = f.perm;
    let mut residual = f.residual;
    let mut t = interpolation_coefficients(&f.r, k, n)
        .expect("pivoted sweep keeps its diagonal above the rank threshold");

    // Greedy pivoting very occasionally leaves a coefficient above the cap;
    // trade the offending skeleton column for the non-skeleton one it fails
    // to interpolate and refactor in the new order. Each swap multiplies
    // |det R11| by the coefficient, so this cannot cycle.
    let mut swaps = 0;
    loop {
        let mut worst = (0usize, 0usize, 0.0f64);
        for i in 0..k {
            for j in 0..(n - k) {
                if t.get(i, j).abs() > worst.2 {
                    worst = (i, j, t.get(i, j).abs());
                }
            }
        }
        if worst.2 <= ID_REFINE_THRESHOLD || swaps >= ID_REFINE_MAX_SWAPS {
            break;
        }
        perm.swap(worst.0, k + worst.1);
        let (r_new, residual_new) = qr_fixed_order(a, &perm, k);
        match interpolation_coefficients(&r_new, k, n) {
            Some(t_new) => {
                t = t_new;
                residual = residual_new;
                swaps += 1;
            }
            None => {
                // Degenerate after the trade; undo and stop refining.
                perm.swap(worst.0, k + worst.1);
                break;
            }
        }
    }

    let skeleton: Vec<usize> = perm[..k].to_vec();
    // Scatter into original column order with an exact identity in the
    // skeleton columns.
    let mut coeff = DenseMatrix::zeros(k, n);
    for (i, &ji) in skeleton.iter().enumerate() {
        coeff.set(i, ji, 1.0);
    }
    let mut max_coeff: f64 = if k > 0 { 1.0 } else { 0.0 };
    for c in 0..(n - k) {
        for i in 0..k {
            let v = t.get(i, c);
            max_coeff = max_coeff.max(v.abs());
            coeff.set(i, perm[k + c], v);
        }
    }
    if max_coeff > ID_COEFF_CAP {
        return Err(HssError::CoefficientCap { value: max_coeff });
    }
    Ok(InterpolativeDecomposition {
        skeleton,
        coeff,
        residual,
    })
}

/// Fixed-rank interpolative decomposition: pick `k` columns of `A` spanning
/// its column space (fewer if the numerical rank collapses first).
pub fn interpolate_fixed(a: &DenseMatrix, k: usize) -> Result<InterpolativeDecomposition> {
    if !a.is_finite() {
        return Err(HssError::InvalidInput("interpolate: non-finite input".into()));
    }
    if k > a.rows().min(a.cols()) {
        return Err(HssError::InvalidArgument(format!(
            "interpolation rank {} exceeds matrix dimensions {}x{}",
            k,
            a.rows(),
            a.cols()
        )));
    }
    interpolate_from_pivoted(a, pivoted_qr(a, PivotStop::Rank(k), false))
}

/// Tolerance-driven interpolative decomposition: the rank is the pivot count
/// at which the column-pivoted trailing residual first drops to `eps`
/// (Frobenius norm, absolute).
pub fn interpolate_tol(a: &DenseMatrix, eps: f64) -> Result<InterpolativeDecomposition> {
    interpolate_tol_checked(a, eps).map(|(id, _)| id)
}

/// [`interpolate_tol`] plus a flag telling whether the tolerance stop
/// actually fired. When it did not, the sweep ran out of pivots: with as
/// many pivots as rows the residual is structurally zero no matter how much
/// tail the factored matrix really has, which is how the compressor detects
/// sample-width overflow.
pub(crate) fn interpolate_tol_checked(
    a: &DenseMatrix,
    eps: f64,
) -> Result<(InterpolativeDecomposition, bool)> {
    if !a.is_finite() {
        return Err(HssError::InvalidInput("interpolate: non-finite input".into()));
    }
    if !(eps >= 0.0) {
        return Err(HssError::InvalidArgument(format!(
            "interpolation tolerance must be nonnegative, got {eps}"
        )));
    }
    let f = pivoted_qr(a, PivotStop::AbsTol(eps), false);
    let tol_satisfied = f.tol_satisfied;
    Ok((interpolate_from_pivoted(a, f)?, tol_satisfied))
}

// ---------------------------------------------------------------------------
// One-sided Jacobi SVD
// ---------------------------------------------------------------------------

const JACOBI_MAX_SWEEPS: usize = 64;

/// Thin SVD with strictly positive singular values, descending.
fn jacobi_svd(a: &DenseMatrix) -> (DenseMatrix, Vec<f64>, DenseMatrix) {
    let (m, n) = (a.rows(), a.cols());
    if m == 0 || n == 0 {
        return (DenseMatrix::zeros(m, 0), Vec::new(), DenseMatrix::zeros(n, 0));
    }
    if m < n {
        let (v, s, u) = jacobi_svd(&a.transpose());
        return (u, s, v);
    }

    let mut b = a.clone();
    let mut v = DenseMatrix::identity(n);
    let tol = f64::EPSILON * (m as f64).sqrt();

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..m {
                    let bp = b.get(i, p);
                    let bq = b.get(i, q);
                    app += bp * bp;
                    aqq += bq * bq;
                    apq += bp * bq;
                }
                if app == 0.0 || aqq == 0.0 {
                    continue;
                }
                if apq.abs() <= tol * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let bp = b.get(i, p);
                    let bq = b.get(i, q);
                    b.set(i, p, c * bp - s * bq);
                    b.set(i, q, s * bp + c * bq);
                }
                for i in 0..n {
                    let vp = v.get(i, p);
                    let vq = v.get(i, q);
                    v.set(i, p, c * vp - s * vq);
                    v.set(i, q, s * vp + c * vq);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<(f64, usize)> = (0..n)
        .map(|j| {
            let s: f64 = (0..m).map(|i| b.get(i, j) * b.get(i, j)).sum::<f64>().sqrt();
            (s, j)
        })
        .collect();
    sigma.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));

    let smax = sigma.first().map_or(0.0, |t| t.0);
    let drop = smax * f64::EPSILON * (m.max(n) as f64).sqrt();
    let kept: Vec<(f64, usize)> = sigma.into_iter().filter(|t| t.0 > drop).collect();

    let r = kept.len();
    let mut u = DenseMatrix::zeros(m, r);
    let mut vout = DenseMatrix::zeros(n, r);
    let mut d = Vec::with_capacity(r);
    for (out, &(s, j)) in kept.iter().enumerate() {
        d.push(s);
        for i in 0..m {
            u.set(i, out, b.get(i, j) / s);
        }
        for i in 0..n {
            vout.set(i, out, v.get(i, j));
        }
    }
    (u, d, vout)
}

/// Truncated SVD with the smallest rank whose Frobenius-norm tail is at most
/// `eps`, judged against the full singular spectrum.
pub fn svd_truncated(a: &DenseMatrix, eps: f64) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(HssError::InvalidInput("svd: non-finite input".into()));
    }
    if !(eps >= 0.0) {
        return Err(HssError::InvalidArgument(format!(
            "svd tolerance must be nonnegative, got {eps}"
        )));
    }
    let (u, d, v) = jacobi_svd(a);

    // Minimal k with sqrt(sum_{i>=k} d_i^2) <= eps.
    let mut suffix = vec![0.0; d.len() + 1];
    for i in (0..d.len()).rev() {
        suffix[i] = suffix[i + 1] + d[i] * d[i];
    }
    let mut k = d.len();
    for (i, &s2) in suffix.iter().enumerate() {
        if s2 <= eps * eps {
            k = i;
            break;
        }
    }

    Ok(SvdResult {
        u: u.select_cols(&(0..k).collect::<Vec<_>>()),
        d: d[..k].to_vec(),
        v: v.select_cols(&(0..k).collect::<Vec<_>>()),
    })
}

/// Extend an `m x t` column-orthonormal matrix to a full orthogonal `m x m`
/// basis; the first `t` columns are kept exactly.
pub(crate) fn complete_orthonormal_basis(q: &DenseMatrix) -> DenseMatrix {
    let (m, t) = (q.rows(), q.cols());
    if t >= m {
        return q.clone();
    }
    // Columns of I - Q Q^t span the orthogonal complement.
    let mut p = DenseMatrix::identity(m);
    let qqt = q.matmul_t(q);
    for i in 0..m {
        for j in 0..m {
            p.set(i, j, p.get(i, j) - qqt.get(i, j));
        }
    }
    let f = pivoted_qr(&p, PivotStop::Rank(m - t), true);
    debug_assert_eq!(f.rank, m - t, "complement rank");
    DenseMatrix::hstack(&[q, &f.q])
}

/// Full SVD `A = U diag(d) V^t` with square orthogonal `U` (`m x m`) and `V`
/// (`n x n`); `d` has `min(m, n)` entries, descending, zero-padded past the
/// numerical rank. Used where multiplying by `U U^t` must be an exact
/// identity, as in basis rotations.
pub(crate) fn svd_full(a: &DenseMatrix) -> (DenseMatrix, Vec<f64>, DenseMatrix) {
    let (m, n) = (a.rows(), a.cols());
    let (u, mut d, v) = jacobi_svd(a);
    d.resize(m.min(n), 0.0);
    (
        complete_orthonormal_basis(&u),
        d,
        complete_orthonormal_basis(&v),
    )
}
