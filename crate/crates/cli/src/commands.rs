use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use rpchol::apps::{clustering_error, krr_fit, smape, spectral_cluster, SpectralParams};
use rpchol::experiment::{self, CompareStrategy, ExperimentConfig, RunOptions};
use rpchol::oracle::{read_matrix_csv, read_numeric_rows, write_matrix_csv};
use rpchol::{generators, model_io, verify};
use rpchol::{greedy_pivots, rpcholesky, stream_rng, Dataset, EntryOracle, KernelSpec, PivotStrategy, StopRule};

use crate::{
    ClusterArgs, Command, CompareArgs, FactorizeArgs, GenArgs, GenKind, KrrArgs, MatrixChoice, VerifyArgs,
    VerifySuite,
};

/// Stream used for single-run commands.
const RUN_STREAM: u64 = 0;

pub fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Factorize(a) => factorize(a),
        Command::Compare(a) => compare(a),
        Command::Krr(a) => krr(a),
        Command::Cluster(a) => cluster(a),
        Command::Verify(a) => verify(a),
        Command::Gen(a) => gen(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    read_matrix_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn read_points(path: &Path) -> Result<Dataset> {
    Dataset::read_csv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

/// Splits a CSV whose last column is the target into points and targets.
fn read_labeled(path: &Path) -> Result<(Dataset, DVector<f64>)> {
    let rows = read_numeric_rows(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    if rows.first().is_none_or(|r| r.len() < 2) {
        bail!("{}: need at least one feature column and a target column", path.display());
    }
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|r| r[r.len() - 1]));
    let x: Vec<&[f64]> = rows.iter().map(|r| &r[..r.len() - 1]).collect();
    Ok((Dataset::from_rows(&x)?, y))
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let rows = read_numeric_rows(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| match r.as_slice() {
            [x] if *x >= 0.0 && x.fract() == 0.0 => Ok(*x as usize),
            _ => bail!("{}: line {} is not a single label", path.display(), i + 1),
        })
        .collect()
}

fn write_lines<T: std::fmt::Display>(path: &Path, values: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = create(path)?;
    for v in values {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

fn factorize(args: FactorizeArgs) -> Result<ExitCode> {
    let oracle = match (&args.source.matrix, &args.source.points) {
        (Some(m), _) => EntryOracle::explicit(read_matrix(m)?)?,
        (None, Some(p)) => {
            let bandwidth = args.kernel.bandwidth.context("--points needs --bandwidth")?;
            EntryOracle::kernel(KernelSpec::new(args.kernel.kernel, bandwidth)?, Arc::new(read_points(p)?))
        }
        (None, None) => unreachable!("clap requires one source"),
    };
    let mut rng = stream_rng(args.seed, RUN_STREAM);
    let (factor, trace) = match (args.k, args.tol) {
        (Some(k), _) => args.strategy.run(&oracle, k, &mut rng)?,
        (None, Some(tol)) => match args.strategy {
            PivotStrategy::RpCholesky => rpcholesky(&oracle, StopRule::Tolerance(tol), &mut rng)?,
            PivotStrategy::Greedy => greedy_pivots(&oracle, StopRule::Tolerance(tol))?,
            other => bail!("--tol is supported for rpcholesky and greedy, not {other}"),
        },
        (None, None) => unreachable!("clap requires --k or --tol"),
    };
    let mut w = create(&args.out)?;
    model_io::write_factor(&factor, &mut w)?;
    w.flush()?;
    if let Some(path) = &args.history {
        write_lines(path, &trace.residual_trace_history)?;
    }
    println!(
        "strategy={} n={} pivots={} entry_evals={} rejected={} relative_residual={}",
        args.strategy,
        oracle.dim(),
        trace.accepted,
        trace.entry_evals,
        trace.rejected_pivots,
        trace.relative_residual()
    );
    Ok(ExitCode::SUCCESS)
}

fn compare(args: CompareArgs) -> Result<ExitCode> {
    let mut config = ExperimentConfig::from_path(&args.config)
        .with_context(|| format!("loading config {}", args.config.display()))?;
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if let Some(r) = args.ranks {
        config.ranks = r;
    }
    if let Some(s) = args.strategies {
        config.strategies = s.iter().map(|s| s.parse::<CompareStrategy>()).collect::<Result<_, _>>()?;
    }
    if let Some(b) = args.block_size {
        config.block_size = b;
    }
    if args.output.is_some() {
        config.output = args.output;
    }
    config.seed = Some(args.seed);
    config.validate()?;
    let opts = RunOptions { parallel: !args.serial, timing: args.timing };
    let rows = experiment::run_comparison(&config, args.seed, opts)?;
    match &config.output {
        Some(path) => {
            let mut w = create(path)?;
            experiment::write_rows(&rows, &mut w)?;
            w.flush()?;
            for (strategy, k, mean, se) in experiment::summarize(&rows) {
                eprintln!("{strategy:>18} k={k:<5} mean_rel_error={mean:.4e} se={se:.1e}");
            }
        }
        None => experiment::write_rows(&rows, std::io::stdout().lock())?,
    }
    Ok(ExitCode::SUCCESS)
}

fn krr(args: KrrArgs) -> Result<ExitCode> {
    let (train, y) = read_labeled(&args.train)?;
    let (test, y_test) = read_labeled(&args.test)?;
    let kernel = KernelSpec::new(args.kernel, args.bandwidth)?;
    let mut rng = stream_rng(args.seed, RUN_STREAM);
    let fit = krr_fit(Arc::new(train), &y, kernel, args.k, args.lambda, args.strategy, &mut rng)?;
    let pred = fit.model.predict(&test)?;
    let err = smape(y_test.as_slice(), pred.as_slice())?;
    if let Some(path) = &args.model {
        let mut w = create(path)?;
        model_io::write_krr_model(&fit.model, &mut w)?;
        w.flush()?;
    }
    if let Some(path) = &args.predictions {
        write_lines(path, pred.iter())?;
    }
    println!(
        "strategy={} k={} pivots={} entry_evals={} regularized={} smape={}",
        args.strategy,
        args.k,
        fit.model.pivots.len(),
        fit.entry_evals,
        fit.regularized,
        err
    );
    Ok(ExitCode::SUCCESS)
}

fn cluster(args: ClusterArgs) -> Result<ExitCode> {
    let data = read_points(&args.data)?;
    let kernel = KernelSpec::new(args.kernel, args.bandwidth)?;
    let params = SpectralParams { k: args.k, m: args.m, c: args.clusters, restarts: args.restarts };
    let mut rng = stream_rng(args.seed, RUN_STREAM);
    let model = spectral_cluster(Arc::new(data), kernel, params, args.strategy, &mut rng)?;
    write_lines(&args.labels, &model.labels)?;
    if let Some(path) = &args.model {
        let mut w = create(path)?;
        model_io::write_cluster_model(&model, &mut w)?;
        w.flush()?;
    }
    let mut line = format!(
        "strategy={} k={} pivots={} objective={}",
        args.strategy,
        args.k,
        model.pivots.len(),
        model.kmeans_objective.last().copied().unwrap_or(0.0)
    );
    if let Some(path) = &args.reference {
        let reference = read_labels(path)?;
        let c = args.clusters.max(reference.iter().max().map_or(0, |m| m + 1));
        line += &format!(" clustering_error={}", clustering_error(&model.labels, &reference, c)?);
    }
    println!("{line}");
    Ok(ExitCode::SUCCESS)
}

fn choice_matrix(choice: &MatrixChoice, seed: u64) -> Result<DMatrix<f64>> {
    match &choice.matrix {
        Some(path) => read_matrix(path),
        None => Ok(generators::powerlaw_psd(choice.n, choice.exponent, experiment::fixture_seed(seed))?),
    }
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let passed = match args.suite {
        VerifySuite::Bound { matrix, r, eps, trials, seed } => {
            let a = choice_matrix(&matrix, seed)?;
            let rep = verify::verify_bound(&a, r, eps, trials, seed)?;
            println!(
                "n={} r={} eps={} eta={:.6e} k_log_branch={:.3} k_doubling_branch={:.3} k={} trials={}",
                rep.n, rep.r, rep.eps, rep.eta, rep.k_log_branch, rep.k_doubling_branch, rep.k, rep.trials
            );
            if rep.exact_rank {
                println!("exact rank: max_residual={:.3e} bound={:.3e}", rep.max_residual, rep.bound);
            } else {
                println!(
                    "mean_residual={:.6e} std_err={:.3e} bound={:.6e}",
                    rep.mean_residual, rep.std_err, rep.bound
                );
            }
            rep.passed
        }
        VerifySuite::Doubling { matrix, ks, trials, seed } => {
            let a = choice_matrix(&matrix, seed)?;
            let reps = verify::verify_doubling(&a, &ks, trials, seed)?;
            for rep in &reps {
                println!(
                    "k={} mean_residual={:.6e} std_err={:.3e} bound={:.6e} {}",
                    rep.k,
                    rep.mean_residual,
                    rep.std_err,
                    rep.bound,
                    verdict(rep.passed)
                );
            }
            reps.iter().all(|r| r.passed)
        }
        VerifySuite::ExpectedResidual { matrix, trials, seed } => {
            let a = choice_matrix(&matrix, seed)?;
            let rep = verify::verify_expected_residual(&a, trials, seed)?;
            println!("trials={} max_z={:.3}", rep.trials, rep.max_z);
            rep.passed
        }
        VerifySuite::Phi { pairs, seed } => {
            let rep = verify::verify_phi_properties(pairs, seed)?;
            println!(
                "pairs={} positivity={:.3e} monotonicity={:.3e} concavity={:.3e} slack={:.0e}",
                rep.pairs, rep.worst_positivity, rep.worst_monotonicity, rep.worst_concavity, rep.slack
            );
            rep.passed
        }
        VerifySuite::GreedyWorstcase { n, eta, eps, trials, seed } => {
            let rep = verify::verify_greedy_worstcase(n, eta, eps, trials, seed)?;
            println!(
                "threshold={:.4} greedy_k_max={} greedy_first_below={:?} rpcholesky_first_below={:?}",
                rep.threshold, rep.greedy_k_max, rep.greedy_first_below, rep.rpcholesky_first_below
            );
            rep.passed
        }
    };
    println!("{}", verdict(passed));
    if passed {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: verification failed");
        Ok(ExitCode::from(2))
    }
}

fn gen(args: GenArgs) -> Result<ExitCode> {
    let out = args.out.context("--out is required")?;
    match args.kind {
        GenKind::Smile { n, seed } => generators::gen_smile(n, seed)?.write_csv_path(&out)?,
        GenKind::Outliers { n, d, n_out, scale, seed, outlier_indices } => {
            let (data, idx) = generators::gen_outliers(n, d, n_out, scale, seed)?;
            data.write_csv_path(&out)?;
            if let Some(path) = outlier_indices {
                write_lines(&path, idx)?;
            }
        }
        GenKind::Blobs { n, d, clusters, separation, spread, seed, labels } => {
            let (data, l) = generators::gen_blobs(n, d, clusters, separation, spread, seed)?;
            data.write_csv_path(&out)?;
            if let Some(path) = labels {
                write_lines(&path, l)?;
            }
        }
        GenKind::Regression { n, d, seed } => {
            let (data, y) = generators::gen_regression(n, d, seed)?;
            let rows: Vec<Vec<f64>> =
                data.points().zip(y.iter()).map(|(x, &t)| x.iter().copied().chain([t]).collect()).collect();
            Dataset::from_rows(&rows)?.write_csv_path(&out)?;
        }
        GenKind::Powerlaw { n, exponent, seed } => {
            write_matrix_csv(&generators::powerlaw_psd(n, exponent, seed)?, create(&out)?)?
        }
        GenKind::GreedyWorstcase { n, eta, eps } => {
            write_matrix_csv(&generators::gen_greedy_worstcase(n, eta, eps)?.matrix, create(&out)?)?
        }
        GenKind::UniformWorstcase { n, m, r, delta } => {
            write_matrix_csv(&generators::gen_uniform_worstcase(n, m, r, delta)?, create(&out)?)?
        }
    }
    Ok(ExitCode::SUCCESS)
}
