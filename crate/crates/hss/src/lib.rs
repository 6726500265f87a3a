//! Hierarchically semiseparable (HSS) compression of structured matrices by
//! randomized sampling.
//!
//! Given only a black-box matrix-vector product (plus its transpose for the
//! non-symmetric case) and per-entry evaluation, the compressor builds a
//! telescoping factorization of every off-diagonal block from a single
//! global random probe: `k + oversampling` matvecs in total, with entry
//! evaluations confined to leaf diagonals and skeleton cross blocks. The
//! resulting factorization supports an `O(n k)` apply, dense
//! reconstruction, conversion to orthonormal bases with diagonal couplings,
//! and bit-exact serialization.
//!
//! Module map:
//! - [`linalg`]: dense QR / SVD / interpolative-decomposition kernels
//! - [`source`], [`synthetic`]: black-box accessors with call counters
//! - [`tree`]: the binary index partition
//! - [`compress`]: the randomized sweep (symmetric and non-symmetric)
//! - [`ops`]: apply, transpose apply, dense reconstruction, statistics
//! - [`orthonormalize`]: recompression into orthonormal form
//! - [`io`]: the HSSF container format
//! - [`bench`]: run reports and the scaling benchmark

pub mod bench;
pub mod compress;
pub mod counters;
pub mod dense;
pub mod error;
pub mod factorization;
pub mod io;
pub mod linalg;
pub mod ops;
pub mod orthonormalize;
pub mod rng;
pub mod source;
pub mod synthetic;
pub mod tree;

pub use compress::{
    compress_nonsymmetric, compress_symmetric, two_sided_id_factor, CompressionConfig,
    CompressionMode,
};
pub use counters::{CounterSnapshot, InstrumentationCounters};
pub use dense::DenseMatrix;
pub use error::{HssError, Result};
pub use factorization::{Coupling, HssFactorization, HssForm};
pub use ops::{apply, apply_transpose, stats, to_dense};
pub use orthonormalize::{orthonormalize, orthonormalize_nonsymmetric};
pub use source::{dense_accessor, kernel_accessor, KernelKind, KernelSpec, MatrixAccessor};
pub use synthetic::synthetic_hss_accessor;
pub use tree::{build_uniform_tree, HssTree, NodeId};
