//! Black-box matrix access: the accessor abstraction consumed by the
//! compressor, plus dense and kernel-matrix adaptors.
//!
//! An accessor exposes exactly what the randomized sweep needs — matvec,
//! transpose matvec and single-entry evaluation — and tallies every call in
//! its [`InstrumentationCounters`].

use std::str::FromStr;

use crate::counters::InstrumentationCounters;
use crate::dense::DenseMatrix;
use crate::error::{HssError, Result};

/// The implementation half of an accessor. Implementations must be safe to
/// probe from concurrent callers.
pub trait MatrixKernel: Send + Sync {
    fn dim(&self) -> usize;
    fn matvec(&self, x: &[f64]) -> Vec<f64>;
    fn t_matvec(&self, x: &[f64]) -> Vec<f64>;
    fn entry(&self, i: usize, j: usize) -> f64;
    /// Analytic flop estimate of one matvec.
    fn flops_per_matvec(&self) -> u64;
    /// Analytic flop estimate of one entry evaluation.
    fn flops_per_entry(&self) -> u64 {
        1
    }
}

/// Black-box handle over an `n x n` matrix with built-in call counters.
pub struct MatrixAccessor {
    n: usize,
    symmetric: bool,
    kernel: Box<dyn MatrixKernel>,
    counters: InstrumentationCounters,
}

impl MatrixAccessor {
    pub fn from_kernel(kernel: Box<dyn MatrixKernel>, symmetric: bool) -> Self {
        MatrixAccessor {
            n: kernel.dim(),
            symmetric,
            kernel,
            counters: InstrumentationCounters::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn counters(&self) -> &InstrumentationCounters {
        &self.counters
    }

    /// `A x`. Panics if `x` has the wrong length.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "matvec vector length");
        self.counters.record_matvec();
        self.counters.record_flops(self.kernel.flops_per_matvec());
        self.kernel.matvec(x)
    }

    /// `A^t x`. Panics if `x` has the wrong length.
    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "transpose matvec vector length");
        self.counters.record_transpose_matvec();
        self.counters.record_flops(self.kernel.flops_per_matvec());
        if self.symmetric {
            self.kernel.matvec(x)
        } else {
            self.kernel.t_matvec(x)
        }
    }

    /// Single entry `A[i, j]`. Panics on out-of-range indices.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.n && j < self.n, "entry index out of range");
        self.counters.record_entries(1);
        self.counters.record_flops(self.kernel.flops_per_entry());
        self.kernel.entry(i, j)
    }

    /// Submatrix `A[rows, cols]`, one counted entry evaluation per element.
    pub fn entries(&self, rows: &[usize], cols: &[usize]) -> DenseMatrix {
        self.counters.record_entries((rows.len() * cols.len()) as u64);
        self.counters
            .record_flops(self.kernel.flops_per_entry() * (rows.len() * cols.len()) as u64);
        let mut out = DenseMatrix::zeros(rows.len(), cols.len());
        for (io, &i) in rows.iter().enumerate() {
            for (jo, &j) in cols.iter().enumerate() {
                debug_assert!(i < self.n && j < self.n);
                out.set(io, jo, self.kernel.entry(i, j));
            }
        }
        out
    }

    /// Materialize the full matrix entrywise (counted). Desk-scale only;
    /// callers enforce their own size guards.
    pub fn materialize(&self) -> DenseMatrix {
        let all: Vec<usize> = (0..self.n).collect();
        self.entries(&all, &all)
    }

    pub(crate) fn record_rng_draws(&self, count: u64) {
        self.counters.record_rng_draws(count);
    }

    pub(crate) fn record_flops(&self, count: u64) {
        self.counters.record_flops(count);
    }
}

// ---------------------------------------------------------------------------
// Dense adaptor
// ---------------------------------------------------------------------------

struct DenseKernel {
    a: DenseMatrix,
}

impl MatrixKernel for DenseKernel {
    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.a.matvec(x)
    }

    fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        self.a.t_matvec(x)
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.a.get(i, j)
    }

    fn flops_per_matvec(&self) -> u64 {
        2 * (self.a.rows() * self.a.cols()) as u64
    }
}

/// Wrap a square dense matrix. The symmetric flag is set by an exact
/// entrywise symmetry scan.
pub fn dense_accessor(a: DenseMatrix) -> Result<MatrixAccessor> {
    if a.rows() != a.cols() {
        return Err(HssError::InvalidInput(format!(
            "dense accessor requires a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if a.rows() == 0 {
        return Err(HssError::InvalidInput("empty matrix".into()));
    }
    if !a.is_finite() {
        return Err(HssError::InvalidInput("matrix has non-finite entries".into()));
    }
    let symmetric = a.is_symmetric();
    Ok(MatrixAccessor::from_kernel(
        Box::new(DenseKernel { a }),
        symmetric,
    ))
}

// ---------------------------------------------------------------------------
// Kernel-matrix adaptor
// ---------------------------------------------------------------------------

/// The three 1D point kernels of the built-in zoo.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// `log |x_i - x_j|`
    LogDistance,
    /// `1 / |x_i - x_j|`
    InverseDistance,
    /// `exp(-|x_i - x_j|)`
    ExpDecay,
}

impl KernelKind {
    fn eval(self, dist: f64) -> f64 {
        match self {
            KernelKind::LogDistance => dist.ln(),
            KernelKind::InverseDistance => 1.0 / dist,
            KernelKind::ExpDecay => (-dist).exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::LogDistance => "log",
            KernelKind::InverseDistance => "inv",
            KernelKind::ExpDecay => "exp",
        }
    }
}

impl FromStr for KernelKind {
    type Err = HssError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(KernelKind::LogDistance),
            "inv" => Ok(KernelKind::InverseDistance),
            "exp" => Ok(KernelKind::ExpDecay),
            other => Err(HssError::InvalidArgument(format!(
                "unknown kernel {other:?} (expected log, inv or exp)"
            ))),
        }
    }
}

/// A kernel matrix over a sorted set of distinct 1D points:
/// `A[i][j] = kernel(|x_i - x_j|)` off the diagonal, a fixed scalar on it.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub points: Vec<f64>,
    pub diagonal: f64,
}

impl KernelSpec {
    /// Points `0, 1, ..., n-1` with a zero diagonal.
    pub fn uniform_grid(kind: KernelKind, n: usize) -> KernelSpec {
        KernelSpec {
            kind,
            points: (0..n).map(|i| i as f64).collect(),
            diagonal: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.points.len() < 2 {
            return Err(HssError::InvalidInput(
                "kernel spec needs at least two points".into(),
            ));
        }
        if !self.points.iter().all(|p| p.is_finite()) || !self.diagonal.is_finite() {
            return Err(HssError::InvalidInput("non-finite kernel spec".into()));
        }
        for w in self.points.windows(2) {
            if w[1] <= w[0] {
                return Err(HssError::InvalidInput(
                    "kernel points must be strictly ascending (coincident or unsorted points)"
                        .into(),
                ));
            }
        }
        Ok(())
    }
}

struct PointKernel {
    spec: KernelSpec,
}

impl PointKernel {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.spec.diagonal
        } else {
            self.spec.kind.eval((self.spec.points[i] - self.spec.points[j]).abs())
        }
    }
}

impl MatrixKernel for PointKernel {
    fn dim(&self) -> usize {
        self.spec.points.len()
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        // Direct O(n^2) summation; this adaptor stands in for a fast
        // analytic multiplier at desk scale.
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.at(i, j) * x[j]).sum())
            .collect()
    }

    fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.at(i, j)
    }

    fn flops_per_matvec(&self) -> u64 {
        let n = self.dim() as u64;
        3 * n * n
    }

    fn flops_per_entry(&self) -> u64 {
        2
    }
}

/// Build the accessor for a kernel spec; always symmetric.
pub fn kernel_accessor(spec: KernelSpec) -> Result<MatrixAccessor> {
    spec.validate()?;
    Ok(MatrixAccessor::from_kernel(
        Box::new(PointKernel { spec }),
        true,
    ))
}
