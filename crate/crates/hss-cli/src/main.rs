//! Benchmark CLI: compress matrices from the kernel zoo, text files or the
//! synthetic exact-rank generator; verify factorization files against dense
//! oracles; and reproduce the cost-model scaling table.
//!
//! Reports are JSON lines (one object per run); scaling tables are CSV with
//! a fixed, versioned header. Exit codes: 0 success, 1 runtime failure
//! (compression, oracle or file errors), 2 usage errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

use hss::bench::{bench_scaling, scaling_csv, BenchReport};
use hss::compress::{
    compress_nonsymmetric_timed, compress_symmetric_timed, CompressionConfig, CompressionMode,
};
use hss::dense::read_dense_text;
use hss::ops::{apply, stats, to_dense};
use hss::orthonormalize::orthonormalize_any;
use hss::source::{dense_accessor, kernel_accessor, KernelKind, KernelSpec};
use hss::synthetic::synthetic_hss_accessor;
use hss::{HssError, HssFactorization, MatrixAccessor};

/// Dense-oracle verification is only attempted up to this size.
const VERIFY_MAX_N: usize = 4096;

#[derive(Parser)]
#[command(name = "hss-bench", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compress a matrix and write an HSSF factorization file plus a JSON
    /// report line.
    Compress(CompressArgs),
    /// Recompute the error of a factorization file against its source.
    Verify(VerifyArgs),
    /// Compression cost over a ladder of sizes on the synthetic generator.
    BenchScaling(ScalingArgs),
}

#[derive(Args)]
#[command(group(
    ArgGroup::new("source").required(true).args(["kernel", "dense_file", "synthetic_rank"])
))]
struct SourceArgs {
    /// Kernel matrix on the unit grid: log, inv or exp. Needs --n.
    #[arg(long, requires = "n")]
    kernel: Option<KernelKind>,

    /// Load a dense matrix from a whitespace text file (first line
    /// "rows cols", then row-major entries).
    #[arg(long, value_name = "PATH")]
    dense_file: Option<PathBuf>,

    /// Synthetic matrix with exact off-diagonal rank K. Needs --n; the n
    /// must be max-leaf times a power of two.
    #[arg(long, value_name = "K", requires = "n")]
    synthetic_rank: Option<usize>,

    /// Matrix dimension for --kernel and --synthetic-rank.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
#[command(group(ArgGroup::new("mode").required(true).multiple(true).args(["rank", "eps"])))]
struct CompressArgs {
    #[command(flatten)]
    source: SourceArgs,

    /// Fixed-rank mode; together with --eps it only sizes the sample.
    #[arg(long)]
    rank: Option<usize>,

    /// Tolerance mode: Frobenius-norm target for every local
    /// interpolation.
    #[arg(long)]
    eps: Option<f64>,

    /// Scale --eps by a Frobenius-norm estimate of the matrix taken from
    /// the initial sample.
    #[arg(long, requires = "eps")]
    relative: bool,

    /// Extra sample columns beyond the target rank.
    #[arg(long, default_value_t = 10)]
    oversampling: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 64)]
    max_leaf: usize,

    /// Use the general (row/column paired) sweep even for symmetric input;
    /// required for non-symmetric matrices.
    #[arg(long)]
    nonsymmetric: bool,

    /// Convert to orthonormal bases with diagonal couplings after
    /// compression.
    #[arg(long)]
    orthonormalize: bool,

    /// Write the factorization here (HSSF container).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Append the JSON report line to this file as well as stdout.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Factorization file to check.
    #[arg(long, value_name = "PATH")]
    file: PathBuf,

    #[command(flatten)]
    source: SourceArgs,

    /// Seed used when the source is --synthetic-rank (must match the
    /// compressing run for the generator to rebuild the same matrix).
    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 64)]
    max_leaf: usize,

    /// The factorization was built with --nonsymmetric (matters only for
    /// regenerating a synthetic source).
    #[arg(long)]
    nonsymmetric: bool,

    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ScalingArgs {
    /// Off-diagonal rank of the synthetic matrices.
    #[arg(long, default_value_t = 8)]
    k: usize,

    #[arg(long, default_value_t = 64)]
    max_leaf: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 10)]
    oversampling: usize,

    /// Comma-separated sizes; each must be max-leaf times a power of two.
    #[arg(long, value_delimiter = ',', default_values_t = vec![512usize, 1024, 2048, 4096])]
    sizes: Vec<usize>,

    /// Timing repetitions per size (fastest sweep is reported).
    #[arg(long, default_value_t = 3)]
    repeats: usize,

    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct VerifyReport {
    schema: &'static str,
    command: &'static str,
    file: String,
    n: usize,
    symmetric: bool,
    form: &'static str,
    max_rank: usize,
    compression_ratio: f64,
    /// Relative Frobenius error of the reconstruction against the source.
    relative_error: f64,
    /// Worst relative deviation of the fast apply from the dense
    /// reconstruction over 20 random vectors.
    apply_check: f64,
}

fn usage_error(msg: &str) -> ! {
    eprintln!("error: {msg}");
    std::process::exit(2);
}

fn threads_from_env() -> usize {
    std::env::var("HSS_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

/// Split `n` into `leaf * 2^levels` with `leaf <= max_leaf`.
fn synthetic_shape(n: usize, max_leaf: usize, k: usize) -> (usize, usize) {
    let mut levels = 0usize;
    let mut leaf = n;
    while leaf > max_leaf {
        if leaf % 2 != 0 {
            usage_error(&format!(
                "--synthetic-rank needs n = leaf * 2^p with leaf <= {max_leaf}; {n} does not split"
            ));
        }
        leaf /= 2;
        levels += 1;
    }
    if leaf < 2 * k {
        usage_error(&format!(
            "synthetic leaf size {leaf} is below 2k = {}; raise --n or --max-leaf",
            2 * k
        ));
    }
    (levels, leaf)
}

/// Build the accessor (and ground truth for synthetic sources).
fn build_source(
    src: &SourceArgs,
    seed: u64,
    max_leaf: usize,
    nonsymmetric: bool,
) -> Result<(MatrixAccessor, Option<HssFactorization>), HssError> {
    if let Some(kind) = src.kernel {
        let n = src.n.expect("clap enforces --n");
        let acc = kernel_accessor(KernelSpec::uniform_grid(kind, n))?;
        return Ok((acc, None));
    }
    if let Some(path) = &src.dense_file {
        let a = read_dense_text(path)?;
        return Ok((dense_accessor(a)?, None));
    }
    let k = src.synthetic_rank.expect("clap enforces one source");
    let n = src.n.expect("clap enforces --n");
    let (levels, leaf) = synthetic_shape(n, max_leaf, k);
    let (acc, truth) = synthetic_hss_accessor(k, levels, leaf, seed, !nonsymmetric)?;
    Ok((acc, Some(truth)))
}

/// Densify the source for error checks: the ground truth for synthetic
/// matrices, entrywise materialization otherwise.
fn source_dense(
    acc: &MatrixAccessor,
    truth: Option<&HssFactorization>,
) -> Result<hss::DenseMatrix, HssError> {
    match truth {
        Some(t) => to_dense(t),
        None => Ok(acc.materialize()),
    }
}

fn append_line(path: &Path, line: &str) -> Result<(), HssError> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?;
    writeln!(f, "{line}")?;
    Ok(())
}

fn emit_report<T: Serialize>(report: &T, path: Option<&Path>) -> Result<(), HssError> {
    let line = serde_json::to_string(report)
        .map_err(|e| HssError::InvalidInput(format!("report serialization: {e}")))?;
    println!("{line}");
    if let Some(path) = path {
        append_line(path, &line)?;
    }
    Ok(())
}

/// Worst relative deviation of the fast apply from dense matvec over 20
/// random probe vectors.
fn apply_consistency(f: &HssFactorization, dense: &hss::DenseMatrix) -> Result<f64, HssError> {
    let n = f.n();
    let scale = dense.frob_norm().max(f64::MIN_POSITIVE);
    let mut rng = hss::rng::GaussianSource::from_seed(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x: Vec<f64> = (0..n).map(|_| rng.next_gaussian()).collect();
        let fast = apply(f, &x)?;
        let slow = dense.matvec(&x);
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dev = fast
            .iter()
            .zip(&slow)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(dev / (scale * xnorm));
    }
    Ok(worst)
}

fn run_compress(args: CompressArgs) -> Result<(), HssError> {
    let mode = match (args.rank, args.eps) {
        (_, Some(eps)) => CompressionMode::Tolerance {
            eps,
            relative: args.relative,
        },
        (Some(k), None) => CompressionMode::FixedRank(k),
        (None, None) => unreachable!("clap enforces the mode group"),
    };
    let mut cfg = CompressionConfig::new(mode);
    cfg.oversampling = args.oversampling;
    cfg.seed = args.seed;
    cfg.max_leaf = args.max_leaf;
    cfg.threads = threads_from_env();
    if args.eps.is_some() {
        // With both flags, --rank budgets the sample width.
        cfg.sample_rank = args.rank;
    }

    let (acc, truth) = build_source(&args.source, args.seed, args.max_leaf, args.nonsymmetric)?;
    let before = acc.counters().snapshot();
    let (f, timings) = if args.nonsymmetric || !acc.is_symmetric() {
        compress_nonsymmetric_timed(&acc, &cfg)?
    } else {
        compress_symmetric_timed(&acc, &cfg)?
    };
    let counters = acc.counters().snapshot().delta(&before);

    let f = if args.orthonormalize {
        orthonormalize_any(&f)?
    } else {
        f
    };

    if let Some(out) = &args.out {
        hss::io::save_file(&f, out)?;
    }

    let mut report = BenchReport::new(
        "compress",
        &cfg,
        f.is_symmetric(),
        f.n(),
        timings,
        counters,
        &f,
    );
    if f.n() <= VERIFY_MAX_N {
        let dense_src = source_dense(&acc, truth.as_ref())?;
        report.relative_error = Some(to_dense(&f)?.rel_frob_dist(&dense_src));
    }
    report.out = args.out.as_ref().map(|p| p.display().to_string());
    emit_report(&report, args.report.as_deref())
}

fn run_verify(args: VerifyArgs) -> Result<(), HssError> {
    let f = hss::io::load_file(&args.file)?;
    if f.n() > VERIFY_MAX_N {
        return Err(HssError::SizeGuard(format!(
            "verification materializes a dense oracle; n = {} exceeds the {VERIFY_MAX_N} guard",
            f.n()
        )));
    }
    let (acc, truth) = build_source(&args.source, args.seed, args.max_leaf, args.nonsymmetric)?;
    if acc.n() != f.n() {
        return Err(HssError::DimensionMismatch(format!(
            "factorization has n = {}, source spec gives n = {}",
            f.n(),
            acc.n()
        )));
    }
    let dense_src = source_dense(&acc, truth.as_ref())?;
    let reconstructed = to_dense(&f)?;
    let s = stats(&f);
    let report = VerifyReport {
        schema: hss::bench::REPORT_SCHEMA,
        command: "verify",
        file: args.file.display().to_string(),
        n: f.n(),
        symmetric: f.is_symmetric(),
        form: s.form,
        max_rank: s.max_rank,
        compression_ratio: s.compression_ratio,
        relative_error: reconstructed.rel_frob_dist(&dense_src),
        apply_check: apply_consistency(&f, &reconstructed)?,
    };
    emit_report(&report, args.report.as_deref())
}

fn run_scaling(args: ScalingArgs) -> Result<(), HssError> {
    let rows = bench_scaling(
        &args.sizes,
        args.k,
        args.max_leaf,
        args.seed,
        args.oversampling,
        args.repeats,
    )?;
    let csv = scaling_csv(&rows);
    match &args.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Compress(args) => run_compress(args),
        Cmd::Verify(args) => run_verify(args),
        Cmd::BenchScaling(args) => run_scaling(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
