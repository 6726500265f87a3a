//! The HSSF container: a little-endian binary file holding the tree shape,
//! per-node ranks and every stored block, bit-exactly.
//!
//! Layout (version 1), all integers little-endian:
//!
//! ```text
//! magic "HSSF" | u32 version | u8 symmetric | u8 form | u64 n | u64 depth
//! then one record per node, level-major (level 0..=depth, position 1..):
//!   basis_u: opt-matrix        opt-matrix = u8 present
//!   basis_v: opt-matrix                     [u64 rows, u64 cols, f64 * rows*cols]
//!   row_skeleton: u64 len, u64 * len
//!   col_skeleton: u64 len, u64 * len
//!   diag: opt-matrix
//!   coupling: u8 count (0 | 1 | 2), then per coupling:
//!     u8 kind (0 dense, 1 diagonal), u64 rows, u64 cols,
//!     f64 * (rows*cols if dense, min(rows, cols) if diagonal)
//! trailer "FSSH"
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dense::DenseMatrix;
use crate::error::{HssError, Result};
use crate::factorization::{Coupling, HssFactorization, HssForm, NodeData};
use crate::tree::HssTree;

const MAGIC: &[u8; 4] = b"HSSF";
const TRAILER: &[u8; 4] = b"FSSH";
const FORMAT_VERSION: u32 = 1;

fn corrupt(msg: impl Into<String>) -> HssError {
    HssError::Corrupt(msg.into())
}

// -- writing ----------------------------------------------------------------

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_matrix(w: &mut impl Write, m: &DenseMatrix) -> Result<()> {
    put_u64(w, m.rows() as u64)?;
    put_u64(w, m.cols() as u64)?;
    for &v in m.data() {
        put_f64(w, v)?;
    }
    Ok(())
}

fn put_opt_matrix(w: &mut impl Write, m: Option<&DenseMatrix>) -> Result<()> {
    match m {
        None => w.write_all(&[0])?,
        Some(m) => {
            w.write_all(&[1])?;
            put_matrix(w, m)?;
        }
    }
    Ok(())
}

fn put_skeleton(w: &mut impl Write, skel: &[usize]) -> Result<()> {
    put_u64(w, skel.len() as u64)?;
    for &i in skel {
        put_u64(w, i as u64)?;
    }
    Ok(())
}

fn put_coupling(w: &mut impl Write, c: &Coupling) -> Result<()> {
    match c {
        Coupling::Dense(m) => {
            w.write_all(&[0])?;
            put_matrix(w, m)?;
        }
        Coupling::Diagonal { rows, cols, values } => {
            w.write_all(&[1])?;
            put_u64(w, *rows as u64)?;
            put_u64(w, *cols as u64)?;
            debug_assert_eq!(values.len(), (*rows).min(*cols));
            for &v in values {
                put_f64(w, v)?;
            }
        }
    }
    Ok(())
}

/// Serialize to any writer.
pub fn write_factorization(f: &HssFactorization, w: &mut impl Write) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&[u8::from(f.is_symmetric())])?;
    w.write_all(&[match f.form() {
        HssForm::Interpolatory => 0u8,
        HssForm::Orthonormal => 1,
        HssForm::General => 2,
    }])?;
    put_u64(w, f.n() as u64)?;
    put_u64(w, f.depth() as u64)?;
    for node in f.nodes() {
        put_opt_matrix(w, node.basis_u.as_ref())?;
        put_opt_matrix(w, node.basis_v.as_ref())?;
        put_skeleton(w, &node.row_skeleton)?;
        put_skeleton(w, &node.col_skeleton)?;
        put_opt_matrix(w, node.diag.as_ref())?;
        match &node.coupling {
            None => w.write_all(&[0])?,
            Some((b12, None)) => {
                w.write_all(&[1])?;
                put_coupling(w, b12)?;
            }
            Some((b12, Some(b21))) => {
                w.write_all(&[2])?;
                put_coupling(w, b12)?;
                put_coupling(w, b21)?;
            }
        }
    }
    w.write_all(TRAILER)?;
    Ok(())
}

// -- reading ----------------------------------------------------------------

fn get_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|_| corrupt("unexpected end of file"))?;
    Ok(buf)
}

fn get_u8(r: &mut impl Read) -> Result<u8> {
    Ok(get_exact::<1>(r)?[0])
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(get_exact::<8>(r)?))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(get_exact::<8>(r)?))
}

fn get_dim(r: &mut impl Read, what: &str) -> Result<usize> {
    let v = get_u64(r)?;
    if v > (1 << 32) {
        return Err(corrupt(format!("implausible {what} {v}")));
    }
    Ok(v as usize)
}

fn get_matrix(r: &mut impl Read) -> Result<DenseMatrix> {
    let rows = get_dim(r, "matrix rows")?;
    let cols = get_dim(r, "matrix cols")?;
    rows.checked_mul(cols)
        .filter(|&len| len <= (1 << 34))
        .ok_or_else(|| corrupt("implausible matrix size"))?;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let v = get_f64(r)?;
        if !v.is_finite() {
            return Err(corrupt("non-finite matrix entry"));
        }
        data.push(v);
    }
    Ok(DenseMatrix::from_vec_unchecked(rows, cols, data))
}

fn get_opt_matrix(r: &mut impl Read) -> Result<Option<DenseMatrix>> {
    match get_u8(r)? {
        0 => Ok(None),
        1 => Ok(Some(get_matrix(r)?)),
        other => Err(corrupt(format!("bad matrix presence byte {other}"))),
    }
}

fn get_skeleton(r: &mut impl Read, n: usize) -> Result<Vec<usize>> {
    let len = get_dim(r, "skeleton length")?;
    if len > n {
        return Err(corrupt("skeleton longer than the matrix dimension"));
    }
    let mut skel = Vec::with_capacity(len);
    for _ in 0..len {
        let v = get_dim(r, "skeleton index")?;
        if v >= n {
            return Err(corrupt("skeleton index out of range"));
        }
        skel.push(v);
    }
    Ok(skel)
}

fn get_coupling(r: &mut impl Read) -> Result<Coupling> {
    match get_u8(r)? {
        0 => Ok(Coupling::Dense(get_matrix(r)?)),
        1 => {
            let rows = get_dim(r, "coupling rows")?;
            let cols = get_dim(r, "coupling cols")?;
            let mut values = Vec::with_capacity(rows.min(cols));
            for _ in 0..rows.min(cols) {
                let v = get_f64(r)?;
                if !v.is_finite() {
                    return Err(corrupt("non-finite coupling entry"));
                }
                values.push(v);
            }
            Ok(Coupling::Diagonal { rows, cols, values })
        }
        other => Err(corrupt(format!("bad coupling kind {other}"))),
    }
}

/// Deserialize from any reader, validating magic, version and structural
/// consistency.
pub fn read_factorization(r: &mut impl Read) -> Result<HssFactorization> {
    let magic = get_exact::<4>(r)?;
    if &magic != MAGIC {
        return Err(corrupt("bad magic (not an HSSF file)"));
    }
    let version = u32::from_le_bytes(get_exact::<4>(r)?);
    if version != FORMAT_VERSION {
        return Err(corrupt(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let symmetric = match get_u8(r)? {
        0 => false,
        1 => true,
        other => Err(corrupt(format!("bad symmetric flag {other}")))?,
    };
    let form = match get_u8(r)? {
        0 => HssForm::Interpolatory,
        1 => HssForm::Orthonormal,
        2 => HssForm::General,
        other => Err(corrupt(format!("bad form byte {other}")))?,
    };
    let n = get_dim(r, "matrix dimension")?;
    let depth = get_dim(r, "tree depth")?;
    if depth > 48 {
        return Err(corrupt(format!("implausible tree depth {depth}")));
    }
    let tree = HssTree::with_depth(n, depth).map_err(|e| corrupt(e.to_string()))?;

    let mut nodes = Vec::with_capacity(tree.node_count());
    for _ in 0..tree.node_count() {
        let basis_u = get_opt_matrix(r)?;
        let basis_v = get_opt_matrix(r)?;
        let row_skeleton = get_skeleton(r, n)?;
        let col_skeleton = get_skeleton(r, n)?;
        let diag = get_opt_matrix(r)?;
        let coupling = match get_u8(r)? {
            0 => None,
            1 => Some((get_coupling(r)?, None)),
            2 => {
                let b12 = get_coupling(r)?;
                let b21 = get_coupling(r)?;
                Some((b12, Some(b21)))
            }
            other => Err(corrupt(format!("bad coupling count {other}")))?,
        };
        nodes.push(NodeData {
            basis_u,
            basis_v,
            row_skeleton,
            col_skeleton,
            diag,
            coupling,
        });
    }
    let trailer = get_exact::<4>(r)?;
    if &trailer != TRAILER {
        return Err(corrupt("bad trailer (truncated or padded file)"));
    }
    HssFactorization::new(tree, symmetric, form, nodes)
        .map_err(|e| corrupt(format!("inconsistent structure: {e}")))
}

pub fn save_file(f: &HssFactorization, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_factorization(f, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_file(path: &Path) -> Result<HssFactorization> {
    let mut r = BufReader::new(File::open(path)?);
    read_factorization(&mut r)
}

/// Serialize into a byte buffer (used for determinism checks).
pub fn to_bytes(f: &HssFactorization) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_factorization(f, &mut buf)?;
    Ok(buf)
}
