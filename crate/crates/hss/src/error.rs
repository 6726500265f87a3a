use thiserror::Error;

/// Errors produced by factorization, accessors and file I/O.
#[derive(Debug, Error)]
pub enum HssError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The random sample cannot certify the block at node (level, pos): the
    /// interpolation consumed the full sample width before its residual
    /// reached the requested tolerance.
    #[error(
        "rank deficiency at node ({level},{pos}): sample of width {width} was \
         exhausted before the interpolation residual reached tolerance {tol:.3e} \
         (trailing residual {residual:.3e})"
    )]
    RankDeficient {
        level: usize,
        pos: usize,
        width: usize,
        residual: f64,
        tol: f64,
    },

    /// An interpolation coefficient exceeded the hard magnitude cap of 2.0,
    /// signalling an ill-conditioned column selection.
    #[error("interpolation coefficient magnitude {value:.6} exceeds the 2.0 cap")]
    CoefficientCap { value: f64 },

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("corrupt factorization file: {0}")]
    Corrupt(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HssError>;
