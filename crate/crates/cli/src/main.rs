//! `rpchol`: low-rank psd approximation experiments from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rpchol::{KernelFamily, PivotStrategy};

#[derive(Parser)]
#[command(name = "rpchol", version, about = "Randomly pivoted Cholesky experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factor a matrix or kernel matrix and write the factor file.
    Factorize(FactorizeArgs),
    /// Run a strategy comparison from a TOML config and write CSV rows.
    Compare(CompareArgs),
    /// Fit restricted kernel ridge regression and report test SMAPE.
    Krr(KrrArgs),
    /// Spectral clustering with a low-rank kernel approximation.
    Cluster(ClusterArgs),
    /// Monte Carlo checks of the approximation guarantees.
    Verify(VerifyArgs),
    /// Generate datasets and test matrices as CSV.
    Gen(GenArgs),
}

/// Where the psd matrix comes from: an explicit CSV matrix, or a kernel over
/// CSV points.
#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
struct Source {
    /// Explicit symmetric psd matrix (headerless CSV).
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Points, one per row (headerless CSV); pair with --kernel and --bandwidth.
    #[arg(long)]
    points: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct KernelArgs {
    /// Kernel family: gaussian or laplace_l1.
    #[arg(long, default_value = "gaussian")]
    kernel: KernelFamily,
    #[arg(long)]
    bandwidth: Option<f64>,
}

#[derive(Args)]
struct FactorizeArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    kernel: KernelArgs,
    /// rpcholesky, blocked:<B>, greedy, uniform, uniform_noreplace, diagonal, rls:<lambda>:<delta>.
    #[arg(long, default_value = "rpcholesky")]
    strategy: PivotStrategy,
    /// Number of pivots.
    #[arg(long, required_unless_present = "tol", conflicts_with = "tol")]
    k: Option<usize>,
    /// Stop once the residual trace is at most tol * tr A (rpcholesky and greedy only).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: u64,
    /// Factor file to write.
    #[arg(long, short)]
    out: PathBuf,
    /// Optional CSV of the residual trace after each pivot.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated ranks, overriding the config.
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    /// Comma-separated strategies, overriding the config.
    #[arg(long, value_delimiter = ',')]
    strategies: Option<Vec<String>>,
    #[arg(long)]
    block_size: Option<usize>,
    /// CSV output path; defaults to the config's output, else stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Run trials one after another instead of in parallel.
    #[arg(long)]
    serial: bool,
    /// Record wall-clock milliseconds per run (makes the CSV non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct KrrArgs {
    /// Training CSV; the last column is the target.
    #[arg(long)]
    train: PathBuf,
    /// Test CSV in the same layout.
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "laplace_l1")]
    kernel: KernelFamily,
    #[arg(long)]
    bandwidth: f64,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "rpcholesky")]
    strategy: PivotStrategy,
    #[arg(long)]
    seed: u64,
    /// Write the fitted model here.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Write test predictions (one per line) here.
    #[arg(long)]
    predictions: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    /// Points, one per row (headerless CSV).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "gaussian")]
    kernel: KernelFamily,
    #[arg(long)]
    bandwidth: f64,
    /// Approximation rank.
    #[arg(long)]
    k: usize,
    /// Embedding dimension.
    #[arg(long, short)]
    m: usize,
    /// Number of clusters.
    #[arg(long, short)]
    clusters: usize,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value = "rpcholesky")]
    strategy: PivotStrategy,
    #[arg(long)]
    seed: u64,
    /// Labels CSV to write (one label per line).
    #[arg(long)]
    labels: PathBuf,
    /// Reference labels to score against.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Write the fitted model here.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(subcommand)]
    suite: VerifySuite,
}

/// Test matrix for the verification suites: a CSV file or a power-law fixture.
#[derive(Args, Clone)]
struct MatrixChoice {
    /// Explicit psd matrix (headerless CSV). Without it a power-law fixture is used.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    n: usize,
    #[arg(long, default_value_t = 2.0)]
    exponent: f64,
}

#[derive(Subcommand)]
enum VerifySuite {
    /// Mean residual at the guaranteed column count against (1 + eps) times the best rank-r error.
    Bound {
        #[command(flatten)]
        matrix: MatrixChoice,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Mean residual trace after k steps against 2^k times the best rank-k error.
    Doubling {
        #[command(flatten)]
        matrix: MatrixChoice,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        ks: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Mean one-step residual against A - A^2 / tr A, entrywise.
    ExpectedResidual {
        #[command(flatten)]
        matrix: MatrixChoice,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Positivity, monotonicity and concavity of A - A^2 / tr A on random pairs.
    Phi {
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Greedy against RPCholesky on the greedy worst-case matrix.
    GreedyWorstcase {
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long)]
        seed: u64,
    },
}

#[derive(Args)]
struct GenArgs {
    #[command(subcommand)]
    kind: GenKind,
    /// Output CSV.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GenKind {
    /// 2-D smile: face, mouth, and two small eyes.
    Smile {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Gaussian cloud with far-away outliers; outlier indices go to --outlier-indices.
    Outliers {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        d: usize,
        #[arg(long, default_value_t = 50)]
        n_out: usize,
        #[arg(long, default_value_t = 100.0)]
        scale: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        outlier_indices: Option<PathBuf>,
    },
    /// Labeled Gaussian blobs; labels go to --labels.
    Blobs {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, short, default_value_t = 4)]
        clusters: usize,
        #[arg(long, default_value_t = 20.0)]
        separation: f64,
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Noiseless regression data; the last column is the target.
    Regression {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Q diag(i^-p) Q^T with random orthogonal Q.
    Powerlaw {
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        exponent: f64,
        #[arg(long)]
        seed: u64,
    },
    /// blkdiag((1 + delta) I, ones) on which greedy pivoting stalls.
    GreedyWorstcase {
        #[arg(long, default_value_t = 400)]
        n: usize,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
    },
    /// All-ones block plus r - 1 copies of the M x M matrix with unit diagonal and delta off it.
    UniformWorstcase {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        delta: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
