//! Row-major dense matrices sized for desk-scale verification work.

use std::fmt;
use std::path::Path;

use crate::error::{HssError, Result};

/// A dense matrix of `f64` entries in row-major order.
///
/// Zero-sized dimensions are legal: rank-0 factors of degenerate inputs are
/// represented as `m x 0` / `0 x n` matrices rather than errors.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix({}x{})", self.rows, self.cols)?;
        if self.rows <= 8 && self.cols <= 8 {
            for i in 0..self.rows {
                write!(f, "\n  ")?;
                for j in 0..self.cols {
                    write!(f, "{:>12.5e} ", self.get(i, j))?;
                }
            }
        }
        Ok(())
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Build from row-major data; the entry count must match and all entries
    /// must be finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(HssError::InvalidInput(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(HssError::InvalidInput(
                "matrix contains a non-finite entry".into(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Like [`from_vec`](Self::from_vec) but without the finiteness scan, for
    /// internal construction from already-validated arithmetic.
    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(HssError::InvalidInput("ragged row lengths".into()));
        }
        Self::from_vec(r, c, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col_vec(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if self.get(i, j) != self.get(j, i) {
                    return false;
                }
            }
        }
        true
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for (k, &a_ik) in a_row.iter().enumerate() {
                if a_ik == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                let o_row = out.row_mut(i);
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a_ik * b;
                }
            }
        }
        out
    }

    /// `self^t * other`.
    pub fn t_matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.rows, other.rows, "t_matmul inner dimension");
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &a_ki) in a_row.iter().enumerate() {
                if a_ki == 0.0 {
                    continue;
                }
                let o_row = out.row_mut(i);
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a_ki * b;
                }
            }
        }
        out
    }

    /// `self * other^t`.
    pub fn matmul_t(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.cols, "matmul_t inner dimension");
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                let dot: f64 = a_row.iter().zip(other.row(j)).map(|(a, b)| a * b).sum();
                out.set(i, j, dot);
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len(), "matvec length");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn t_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len(), "t_matvec length");
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        out
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        DenseMatrix::from_vec_unchecked(self.rows, self.cols, data)
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        let data = self.data.iter().map(|a| a * s).collect();
        DenseMatrix::from_vec_unchecked(self.rows, self.cols, data)
    }

    /// Copy of the contiguous row block `range`.
    pub fn rows_range(&self, range: std::ops::Range<usize>) -> DenseMatrix {
        assert!(range.end <= self.rows);
        let data = self.data[range.start * self.cols..range.end * self.cols].to_vec();
        DenseMatrix::from_vec_unchecked(range.len(), self.cols, data)
    }

    /// Copy of the rows listed in `idx` (in that order).
    pub fn select_rows(&self, idx: &[usize]) -> DenseMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        DenseMatrix::from_vec_unchecked(idx.len(), self.cols, data)
    }

    /// Copy of the columns listed in `idx` (in that order).
    pub fn select_cols(&self, idx: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, idx.len());
        for i in 0..self.rows {
            for (jo, &ji) in idx.iter().enumerate() {
                out.set(i, jo, self.get(i, ji));
            }
        }
        out
    }

    /// Stack matrices vertically; all parts must agree on the column count
    /// (parts with zero rows are permitted regardless).
    pub fn vstack(parts: &[&DenseMatrix]) -> DenseMatrix {
        let cols = parts
            .iter()
            .find(|p| p.rows > 0)
            .map_or_else(|| parts.first().map_or(0, |p| p.cols), |p| p.cols);
        let rows = parts.iter().map(|p| p.rows).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for p in parts {
            if p.rows > 0 {
                assert_eq!(p.cols, cols, "vstack column mismatch");
                data.extend_from_slice(&p.data);
            }
        }
        DenseMatrix::from_vec_unchecked(rows, cols, data)
    }

    pub fn hstack(parts: &[&DenseMatrix]) -> DenseMatrix {
        let rows = parts
            .iter()
            .find(|p| p.cols > 0)
            .map_or_else(|| parts.first().map_or(0, |p| p.rows), |p| p.rows);
        let cols: usize = parts.iter().map(|p| p.cols).sum();
        let mut out = DenseMatrix::zeros(rows, cols);
        let mut off = 0;
        for p in parts {
            if p.cols > 0 {
                assert_eq!(p.rows, rows, "hstack row mismatch");
                for i in 0..rows {
                    out.row_mut(i)[off..off + p.cols].copy_from_slice(p.row(i));
                }
            }
            off += p.cols;
        }
        out
    }

    /// Write `block` into `self` with its top-left corner at `(i0, j0)`.
    pub fn set_block(&mut self, i0: usize, j0: usize, block: &DenseMatrix) {
        assert!(i0 + block.rows <= self.rows && j0 + block.cols <= self.cols);
        for i in 0..block.rows {
            self.row_mut(i0 + i)[j0..j0 + block.cols].copy_from_slice(block.row(i));
        }
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |self - other|` entrywise; matrices must share a shape.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Relative Frobenius distance `|self - other|_F / |other|_F`
    /// (absolute distance when `other` is zero).
    pub fn rel_frob_dist(&self, other: &DenseMatrix) -> f64 {
        let diff = self.sub(other).frob_norm();
        let scale = other.frob_norm();
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }
}

/// Read a dense matrix from a whitespace-separated text file: the first line
/// holds `rows cols`, followed by rows*cols entries in row-major order
/// (line breaks are not significant beyond the header).
pub fn read_dense_text(path: &Path) -> Result<DenseMatrix> {
    let text = std::fs::read_to_string(path)?;
    let mut tokens = text.split_whitespace();
    let rows: usize = tokens
        .next()
        .ok_or_else(|| HssError::InvalidInput("empty matrix file".into()))?
        .parse()
        .map_err(|_| HssError::InvalidInput("bad row count".into()))?;
    let cols: usize = tokens
        .next()
        .ok_or_else(|| HssError::InvalidInput("missing column count".into()))?
        .parse()
        .map_err(|_| HssError::InvalidInput("bad column count".into()))?;
    if rows == 0 || cols == 0 {
        return Err(HssError::InvalidInput("matrix dimensions must be positive".into()));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for tok in tokens {
        let v: f64 = tok
            .parse()
            .map_err(|_| HssError::InvalidInput(format!("bad matrix entry {tok:?}")))?;
        data.push(v);
    }
    if data.len() != rows * cols {
        return Err(HssError::InvalidInput(format!(
            "expected {} entries, found {}",
            rows * cols,
            data.len()
        )));
    }
    DenseMatrix::from_vec(rows, cols, data)
}

/// Write a dense matrix in the text format accepted by [`read_dense_text`].
pub fn write_dense_text(path: &Path, m: &DenseMatrix) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.17e}", m.get(i, j));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
