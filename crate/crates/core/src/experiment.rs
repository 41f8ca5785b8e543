//! Head-to-head strategy comparisons driven by a TOML config, with CSV output.
//!
//! CSV columns, in order: `experiment,strategy,k,trial,rel_trace_error,
//! entry_evals,wall_ms,extra`. `wall_ms` is empty unless timing is enabled,
//! so untimed runs are byte-for-byte reproducible.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{rls_lambda_for_budget, rls_pivots_with_scores, RlsScores};
use crate::error::{invalid, Error, Result};
use crate::generators::{self, smile, OUTLIERS_BANDWIDTH};
use crate::linalg::relative_trace_error_from_trace;
use crate::oracle::{read_matrix_csv, Dataset, EntryOracle, KernelFamily, KernelSpec};
use crate::rng::{stream_rng, FIXTURE_STREAM};
use crate::strategy::PivotStrategy;

/// Default RLS failure probability when the ridge is matched to the budget.
pub const DEFAULT_RLS_DELTA: f64 = 0.1;

/// The matrix an experiment runs on. Random fixtures are generated from the
/// experiment seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixSpec {
    Smile {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_smile_bandwidth")]
        bandwidth: f64,
    },
    Outliers {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_outlier_dim")]
        d: usize,
        #[serde(default = "default_outlier_count")]
        n_out: usize,
        #[serde(default = "default_outlier_scale")]
        scale: f64,
        #[serde(default = "default_outlier_bandwidth")]
        bandwidth: f64,
    },
    Powerlaw {
        n: usize,
        exponent: f64,
    },
    GreedyWorstcase {
        n: usize,
        eta: f64,
        eps: f64,
    },
    UniformWorstcase {
        n: usize,
        m: usize,
        r: usize,
        delta: f64,
    },
    /// Kernel matrix of the points in a CSV file (one point per row).
    Points {
        path: PathBuf,
        kernel: KernelFamily,
        bandwidth: f64,
    },
    /// Explicit matrix from a CSV file.
    Matrix {
        path: PathBuf,
    },
}

fn default_n() -> usize {
    2000
}
fn default_smile_bandwidth() -> f64 {
    smile::BANDWIDTH
}
fn default_outlier_dim() -> usize {
    20
}
fn default_outlier_count() -> usize {
    50
}
fn default_outlier_scale() -> f64 {
    100.0
}
fn default_outlier_bandwidth() -> f64 {
    OUTLIERS_BANDWIDTH
}

impl MatrixSpec {
    /// Builds the oracle. Random fixtures use the reserved fixture stream of
    /// `seed`, so they do not share randomness with any trial.
    pub fn build(&self, seed: u64) -> Result<EntryOracle> {
        let fixture_seed = fixture_seed(seed);
        Ok(match self {
            MatrixSpec::Smile { n, bandwidth } => EntryOracle::kernel(
                KernelSpec::gaussian(*bandwidth)?,
                Arc::new(generators::gen_smile(*n, fixture_seed)?),
            ),
            MatrixSpec::Outliers { n, d, n_out, scale, bandwidth } => {
                let (data, _) = generators::gen_outliers(*n, *d, *n_out, *scale, fixture_seed)?;
                EntryOracle::kernel(KernelSpec::gaussian(*bandwidth)?, Arc::new(data))
            }
            MatrixSpec::Powerlaw { n, exponent } => {
                EntryOracle::explicit(generators::powerlaw_psd(*n, *exponent, fixture_seed)?)?
            }
            MatrixSpec::GreedyWorstcase { n, eta, eps } => {
                EntryOracle::explicit(generators::gen_greedy_worstcase(*n, *eta, *eps)?.matrix)?
            }
            MatrixSpec::UniformWorstcase { n, m, r, delta } => {
                EntryOracle::explicit(generators::gen_uniform_worstcase(*n, *m, *r, *delta)?)?
            }
            MatrixSpec::Points { path, kernel, bandwidth } => EntryOracle::kernel(
                KernelSpec::new(*kernel, *bandwidth)?,
                Arc::new(Dataset::read_csv_path(path)?),
            ),
            MatrixSpec::Matrix { path } => {
                EntryOracle::explicit(read_matrix_csv(std::fs::File::open(path)?)?)?
            }
        })
    }
}

/// Seed for fixture generation, derived from the experiment seed.
pub fn fixture_seed(seed: u64) -> u64 {
    use rand::RngCore;
    stream_rng(seed, FIXTURE_STREAM).next_u64()
}

/// A strategy as listed in an experiment config. Besides the fixed
/// [`PivotStrategy`] forms, `rls` or `rls:<delta>` selects ridge leverage
/// score sampling with the ridge chosen so the expected sample size is `k`,
/// and bare `blocked` uses the config's block size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompareStrategy {
    Fixed(PivotStrategy),
    RlsBudget { delta: f64 },
    BlockedDefault,
}

impl fmt::Display for CompareStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompareStrategy::Fixed(s) => s.fmt(f),
            CompareStrategy::RlsBudget { delta } if *delta == DEFAULT_RLS_DELTA => f.write_str("rls"),
            CompareStrategy::RlsBudget { delta } => write!(f, "rls:{delta}"),
            CompareStrategy::BlockedDefault => f.write_str("blocked"),
        }
    }
}

impl FromStr for CompareStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split(':').collect::<Vec<_>>().as_slice() {
            ["rls"] => Ok(CompareStrategy::RlsBudget { delta: DEFAULT_RLS_DELTA }),
            ["rls", d] => d
                .parse()
                .map(|delta| CompareStrategy::RlsBudget { delta })
                .map_err(|_| Error::Parse(format!("bad rls delta in {s:?}"))),
            ["blocked"] => Ok(CompareStrategy::BlockedDefault),
            _ => s.parse().map(CompareStrategy::Fixed),
        }
    }
}

impl TryFrom<String> for CompareStrategy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<CompareStrategy> for String {
    fn from(s: CompareStrategy) -> String {
        s.to_string()
    }
}

impl Serialize for CompareStrategy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for CompareStrategy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// May be left out of the file; the CLI requires `--seed` anyway.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub ranks: Vec<usize>,
    pub strategies: Vec<CompareStrategy>,
    #[serde(default = "default_block_size")]
    pub block_size: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub matrix: MatrixSpec,
}

fn default_trials() -> usize {
    1
}
fn default_block_size() -> usize {
    20
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.ranks.is_empty() || self.ranks[0] == 0 {
            return Err(invalid("ranks must be positive"));
        }
        if self.ranks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("ranks must be strictly ascending"));
        }
        if self.strategies.is_empty() {
            return Err(invalid("at least one strategy is required"));
        }
        if self.block_size == 0 {
            return Err(invalid("block size must be at least 1"));
        }
        Ok(())
    }

    fn resolve(&self, s: CompareStrategy) -> CompareStrategy {
        match s {
            CompareStrategy::BlockedDefault => {
                CompareStrategy::Fixed(PivotStrategy::Blocked { block: self.block_size })
            }
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub strategy: String,
    pub k: usize,
    pub trial: usize,
    pub rel_trace_error: f64,
    pub entry_evals: u64,
    pub wall_ms: Option<f64>,
    pub extra: Option<f64>,
}

pub fn write_rows<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record([
        "experiment",
        "strategy",
        "k",
        "trial",
        "rel_trace_error",
        "entry_evals",
        "wall_ms",
        "extra",
    ])?;
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_rows_path(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    write_rows(rows, std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn read_rows<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Orders rows by (strategy position in the config, k, trial).
pub fn canonical_sort(rows: &mut [ResultRow], strategy_order: &[String]) {
    let position = |name: &str| strategy_order.iter().position(|s| s == name).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        (position(&a.strategy), &a.strategy, a.k, a.trial).cmp(&(
            position(&b.strategy),
            &b.strategy,
            b.k,
            b.trial,
        ))
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Execute trials on the rayon pool.
    pub parallel: bool,
    /// Record wall-clock time per run.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { parallel: true, timing: false }
    }
}

/// Runs every strategy × rank × trial of the config and returns the rows in
/// canonical order. Trial `t` draws from stream `t` of `seed`, so results do
/// not depend on scheduling.
pub fn run_comparison(config: &ExperimentConfig, seed: u64, opts: RunOptions) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let oracle = config.matrix.build(seed)?;
    let trace = oracle.trace_uncounted();
    if trace <= 0.0 {
        return Err(Error::ZeroTrace);
    }
    let n = oracle.dim();
    if let Some(&k) = config.ranks.last() {
        if k > n {
            return Err(invalid(format!("rank {k} exceeds matrix dimension {n}")));
        }
    }
    let strategies: Vec<CompareStrategy> = config.strategies.iter().map(|&s| config.resolve(s)).collect();

    // ridges matched to each budget, computed once per (strategy, k)
    let mut rls: Vec<Vec<Option<RlsScores>>> = Vec::with_capacity(strategies.len());
    for s in &strategies {
        let per_k = match s {
            CompareStrategy::RlsBudget { delta } => {
                let a = oracle.as_explicit().ok_or_else(|| {
                    invalid("RLS sampling needs an explicit matrix; kernel oracles are not supported")
                })?;
                config
                    .ranks
                    .iter()
                    .map(|&k| rls_lambda_for_budget(a, k as f64, *delta).map(Some))
                    .collect::<Result<Vec<_>>>()?
            }
            CompareStrategy::Fixed(PivotStrategy::Rls { .. }) if !oracle.is_explicit() => {
                return Err(invalid("RLS sampling needs an explicit matrix"));
            }
            _ => vec![None; config.ranks.len()],
        };
        rls.push(per_k);
    }

    let tasks: Vec<(usize, usize, usize)> = (0..strategies.len())
        .flat_map(|s| (0..config.ranks.len()).flat_map(move |k| (0..config.trials).map(move |t| (s, k, t))))
        .collect();
    let run = |&(si, ki, trial): &(usize, usize, usize)| -> Result<ResultRow> {
        let k = config.ranks[ki];
        let strategy = strategies[si];
        let local = oracle.fresh();
        let mut rng = stream_rng(seed, trial as u64);
        let start = Instant::now();
        let (factor, run_trace) = match strategy {
            CompareStrategy::Fixed(s) => s.run(&local, k, &mut rng)?,
            CompareStrategy::RlsBudget { .. } => {
                let scores = rls[si][ki].as_ref().expect("scores computed for rls strategies");
                let (f, mut t) = rls_pivots_with_scores(&local, scores, &mut rng)?;
                // charge the dense formation the exact scores required
                t.entry_evals += (n * n) as u64;
                (f, t)
            }
            CompareStrategy::BlockedDefault => unreachable!("resolved above"),
        };
        let wall_ms = opts.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
        let rel_trace_error = if local.is_explicit() {
            relative_trace_error_from_trace(trace, &factor)
        } else {
            run_trace.relative_residual()
        };
        Ok(ResultRow {
            experiment: config.experiment.clone(),
            strategy: strategy.to_string(),
            k,
            trial,
            rel_trace_error,
            entry_evals: run_trace.entry_evals,
            wall_ms,
            extra: None,
        })
    };
    let mut rows = if opts.parallel {
        tasks.par_iter().map(run).collect::<Result<Vec<_>>>()?
    } else {
        tasks.iter().map(run).collect::<Result<Vec<_>>>()?
    };
    let order: Vec<String> = strategies.iter().map(|s| s.to_string()).collect();
    canonical_sort(&mut rows, &order);
    Ok(rows)
}

/// Mean and standard error of the relative trace error per (strategy, k), in
/// first-appearance order.
pub fn summarize(rows: &[ResultRow]) -> Vec<(String, usize, f64, f64)> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in rows {
        let key = (r.strategy.clone(), r.k);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(s, k)| {
            let xs: Vec<f64> = rows
                .iter()
                .filter(|r| r.strategy == s && r.k == k)
                .map(|r| r.rel_trace_error)
                .collect();
            let (mean, se) = mean_and_stderr(&xs);
            (s, k, mean, se)
        })
        .collect()
}

/// Sample mean and standard error of the mean (zero for fewer than two samples).
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
