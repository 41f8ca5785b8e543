//! Acceptance suite: runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{dmatrix, DVector};
use rand::Rng;
use rpchol::apps::{clustering_error, krr_fit, smape, spectral_cluster, SpectralParams};
use rpchol::experiment::{read_rows, run_comparison, ExperimentConfig, MatrixSpec, RunOptions};
use rpchol::generators::{gen_blobs, gen_regression, powerlaw_psd, random_psd};
use rpchol::linalg::relative_frobenius;
use rpchol::rng::seeded;
use rpchol::verify::{verify_expected_residual, verify_greedy_worstcase, verify_phi_properties, verify_bound};
use rpchol::{
    partial_cholesky_naive, rpcholesky, stream_rng, EntryOracle, KernelSpec, PivotStrategy, StopRule,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn entry_count() -> Outcome {
    let (n, k) = (1000, 100);
    let (points, _) = gen_regression(n, 5, 11).map_err(|e| e.to_string())?;
    let kernel = EntryOracle::kernel(KernelSpec::laplace_l1(1.0).unwrap(), Arc::new(points));
    let explicit = EntryOracle::explicit(random_psd(n, n, 12)).unwrap();
    let mut details = Vec::new();
    let mut ok = true;
    for (name, oracle) in [("kernel", &kernel), ("explicit", &explicit)] {
        let start = Instant::now();
        let (_, trace) = rpcholesky(oracle, StopRule::FixedRank(k), &mut stream_rng(1, 0)).unwrap();
        let secs = start.elapsed().as_secs_f64();
        ok &= trace.rejected_pivots == 0 && trace.entry_evals == 101_000 && oracle.evals() == 101_000 && secs < 1.0;
        details.push(format!(
            "{name}: evals={} rejected={} time={secs:.3}s",
            trace.entry_evals, trace.rejected_pivots
        ));
    }
    check(ok, details.join("; "))
}

fn naive_equivalence() -> Outcome {
    let mut rng = seeded(2);
    let mut worst: f64 = 0.0;
    for t in 0..50 {
        let n = rng.random_range(10..=200);
        let a = if t % 2 == 0 {
            random_psd(n, rng.random_range(1..=n), rng.random())
        } else {
            powerlaw_psd(n, rng.random_range(0.5..3.0), rng.random()).unwrap()
        };
        let k = rng.random_range(1..=n.min(60));
        let oracle = EntryOracle::explicit(a.clone()).unwrap();
        let (f, _) = rpcholesky(&oracle, StopRule::FixedRank(k), &mut stream_rng(3, t)).unwrap();
        let naive = partial_cholesky_naive(&a, f.pivots()).unwrap();
        worst = worst.max(relative_frobenius(&f.approximation(), &naive.approximation));
    }
    check(worst <= 1e-10, format!("50 fixtures, worst relative Frobenius gap {worst:.2e}"))
}

fn exact_at_rank() -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    for (i, r) in [1usize, 5, 20].into_iter().enumerate() {
        let a = random_psd(300, r, 30 + i as u64);
        let oracle = EntryOracle::explicit(a.clone()).unwrap();
        let (f, trace) = rpcholesky(&oracle, StopRule::FixedRank(r), &mut stream_rng(4, i as u64)).unwrap();
        let residual = (&a - f.approximation()).trace();
        let rel = residual.abs() / a.trace();
        ok &= trace.accepted == r && rel <= 1e-10;
        details.push(format!("r={r}: accepted={} rel_residual={rel:.1e}", trace.accepted));
    }
    check(ok, details.join("; "))
}

fn mean_error_bound() -> Outcome {
    let a = powerlaw_psd(500, 2.0, 5).unwrap();
    let start = Instant::now();
    let rep = verify_bound(&a, 5, 0.5, 100, 6).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let k_expected = (rep.k_log_branch).ceil() as usize;
    check(
        rep.passed && rep.k == k_expected && secs < 30.0,
        format!(
            "eta={:.4} k={} mean={:.4e} se={:.1e} bound={:.4e} time={secs:.1}s",
            rep.eta, rep.k, rep.mean_residual, rep.std_err, rep.bound
        ),
    )
}

fn expected_residual() -> Outcome {
    let a = dmatrix![
        4.0, 2.0, 0.6, 0.0, 1.0;
        2.0, 3.0, 0.5, 0.2, 0.0;
        0.6, 0.5, 2.0, 0.3, 0.4;
        0.0, 0.2, 0.3, 1.0, 0.1;
        1.0, 0.0, 0.4, 0.1, 0.5
    ];
    let rep = verify_expected_residual(&a, 100_000, 7).map_err(|e| e.to_string())?;
    check(rep.passed, format!("10^5 single steps, max |z| = {:.2}", rep.max_z))
}

fn phi_properties() -> Outcome {
    let rep = verify_phi_properties(100, 8).map_err(|e| e.to_string())?;
    check(
        rep.passed,
        format!(
            "100 pairs, worst scaled min eig: positivity {:.1e}, monotonicity {:.1e}, concavity {:.1e}",
            rep.worst_positivity, rep.worst_monotonicity, rep.worst_concavity
        ),
    )
}

fn greedy_worst_case() -> Outcome {
    let rep = verify_greedy_worstcase(400, 0.1, 1.0, 20, 9).map_err(|e| e.to_string())?;
    check(
        rep.passed,
        format!(
            "threshold {:.2}: greedy at or below it from k={:?} (checked k<={}), RPCholesky mean below it from k={:?}",
            rep.threshold, rep.greedy_first_below, rep.greedy_k_max, rep.rpcholesky_first_below
        ),
    )
}

fn mean_error(rows: &[rpchol::experiment::ResultRow], strategy: &str) -> f64 {
    let xs: Vec<f64> = rows.iter().filter(|r| r.strategy == strategy).map(|r| r.rel_trace_error).collect();
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn error_orderings() -> Outcome {
    let start = Instant::now();
    let smile = ExperimentConfig {
        experiment: "smile".into(),
        seed: None,
        trials: 100,
        ranks: vec![100],
        strategies: vec!["rpcholesky".parse().unwrap(), "uniform".parse().unwrap()],
        block_size: 1,
        output: None,
        matrix: MatrixSpec::Smile { n: 2000, bandwidth: rpchol::generators::smile::BANDWIDTH },
    };
    let rows = run_comparison(&smile, 10, RunOptions::default()).map_err(|e| e.to_string())?;
    let (rpc_s, uni_s) = (mean_error(&rows, "rpcholesky"), mean_error(&rows, "uniform"));
    let outliers = ExperimentConfig {
        experiment: "outliers".into(),
        ranks: vec![60],
        strategies: vec!["rpcholesky".parse().unwrap(), "greedy".parse().unwrap()],
        matrix: toml::from_str("kind = \"outliers\"").unwrap(),
        ..smile
    };
    let rows = run_comparison(&outliers, 10, RunOptions::default()).map_err(|e| e.to_string())?;
    let (rpc_o, greedy_o) = (mean_error(&rows, "rpcholesky"), mean_error(&rows, "greedy"));
    let secs = start.elapsed().as_secs_f64();
    let (r_smile, r_out) = (uni_s / rpc_s, greedy_o / rpc_o);
    check(
        r_smile >= 10.0 && r_out >= 5.0 && secs < 300.0,
        format!(
            "smile k=100: uniform/RPCholesky = {r_smile:.1} ({uni_s:.2e}/{rpc_s:.2e}); \
             outliers k=60: greedy/RPCholesky = {r_out:.2} ({greedy_o:.2e}/{rpc_o:.2e}); time={secs:.1}s"
        ),
    )
}

fn krr_correctness() -> Outcome {
    // full pivot set against a dense solve of the same restricted system
    let mut worst: f64 = 0.0;
    for (i, n) in [200usize, 350, 500].into_iter().enumerate() {
        let (train, y) = gen_regression(n, 4, 40 + i as u64).unwrap();
        let kernel = KernelSpec::laplace_l1(2.0).unwrap();
        let lambda = 1e-4;
        let train = Arc::new(train);
        let fit = krr_fit(train.clone(), &y, kernel, n, lambda, PivotStrategy::Greedy, &mut seeded(0))
            .map_err(|e| e.to_string())?;
        if fit.model.pivots.len() != n {
            return Err(format!("full pivot set not reached: {} of {n}", fit.model.pivots.len()));
        }
        let a = EntryOracle::kernel(kernel, train).to_dense();
        let s = &fit.model.pivots;
        let a_ns = a.select_columns(s);
        let a_ss = a_ns.select_rows(s);
        let m = a_ns.transpose() * &a_ns + a_ss * (lambda * n as f64);
        let rhs = a_ns.transpose() * &y;
        let reference = m.lu().solve(&rhs).ok_or("dense reference solve failed")?;
        worst = worst.max((&fit.model.coefficients - &reference).norm() / reference.norm());
    }
    // SMAPE decreasing in k, averaged over seeds
    let ks = [10usize, 20, 40, 80];
    let seeds = 20;
    let mut mean = [0.0; 4];
    for seed in 0..seeds {
        let (all, y_all) = gen_regression(1500, 4, 100 + seed).unwrap();
        let train_idx: Vec<usize> = (0..1000).collect();
        let test_idx: Vec<usize> = (1000..1500).collect();
        let train = Arc::new(all.select(&train_idx).unwrap());
        let test = all.select(&test_idx).unwrap();
        let y = DVector::from_iterator(1000, train_idx.iter().map(|&i| y_all[i]));
        let y_test: Vec<f64> = test_idx.iter().map(|&i| y_all[i]).collect();
        for (j, &k) in ks.iter().enumerate() {
            let fit = krr_fit(
                train.clone(),
                &y,
                KernelSpec::laplace_l1(4.0).unwrap(),
                k,
                1e-6,
                PivotStrategy::RpCholesky,
                &mut stream_rng(seed, j as u64),
            )
            .map_err(|e| e.to_string())?;
            let pred = fit.model.predict(&test).unwrap();
            mean[j] += smape(&y_test, pred.as_slice()).unwrap() / seeds as f64;
        }
    }
    let monotone = mean.windows(2).all(|w| w[1] < w[0]);
    check(
        worst <= 1e-8 && monotone,
        format!(
            "full-pivot coefficient gap {worst:.1e}; mean SMAPE k=10,20,40,80: {:.4} {:.4} {:.4} {:.4}",
            mean[0], mean[1], mean[2], mean[3]
        ),
    )
}

fn clustering() -> Outcome {
    let mut good = 0;
    let mut monotone = true;
    let mut worst: f64 = 0.0;
    for trial in 0..100u64 {
        let (data, labels) = gen_blobs(2000, 2, 4, 20.0, 1.0, 500 + trial).unwrap();
        let params = SpectralParams { k: 30, m: 4, c: 4, restarts: 1 };
        let model = spectral_cluster(
            Arc::new(data),
            KernelSpec::gaussian(2.0).unwrap(),
            params,
            PivotStrategy::RpCholesky,
            &mut stream_rng(11, trial),
        )
        .map_err(|e| e.to_string())?;
        let err = clustering_error(&model.labels, &labels, 4).unwrap();
        worst = worst.max(err);
        good += usize::from(err <= 0.005);
        monotone &= model.kmeans_objective.windows(2).all(|w| w[1] <= w[0]);
    }
    check(
        good >= 95 && monotone,
        format!("{good}/100 trials with error <= 0.5% (worst {worst:.4}); k-means objective monotone: {monotone}"),
    )
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rpchol")).args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).trim().to_string())
    }
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |name: &str| dir.path().join(name);
    std::fs::write(
        path("config.toml"),
        "experiment = \"repro\"\ntrials = 8\nranks = [5, 10, 20]\n\
         strategies = [\"rpcholesky\", \"blocked\", \"uniform\", \"greedy\", \"diagonal\"]\nblock_size = 4\n\
         [matrix]\nkind = \"smile\"\nn = 400\n",
    )
    .map_err(|e| e.to_string())?;
    let config = path("config.toml");
    let config = config.to_str().unwrap();
    let outputs = ["a.csv", "b.csv", "serial.csv"].map(|f| path(f));
    for (out, serial) in outputs.iter().zip([false, false, true]) {
        let mut args = vec!["compare", "--config", config, "--seed", "42", "--output", out.to_str().unwrap()];
        if serial {
            args.push("--serial");
        }
        run_cli(&args)?;
    }
    let read = |p: &Path| std::fs::read(p).map_err(|e| e.to_string());
    let (a, b, serial) = (read(&outputs[0])?, read(&outputs[1])?, read(&outputs[2])?);
    let rows = read_rows(a.as_slice()).map_err(|e| e.to_string())?;
    let identical = a == b;
    let serial_matches = read_rows(serial.as_slice()).map_err(|e| e.to_string())? == rows;
    check(
        identical && serial_matches && rows.len() == 8 * 3 * 5,
        format!(
            "{} rows; repeated run byte-identical: {identical}; serial equals parallel: {serial_matches}",
            rows.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("entry-count exactness", entry_count),
        ("naive/efficient equivalence", naive_equivalence),
        ("exactness at rank", exact_at_rank),
        ("mean error bound", mean_error_bound),
        ("expected-residual map", expected_residual),
        ("residual map properties", phi_properties),
        ("greedy worst case", greedy_worst_case),
        ("qualitative error orderings", error_orderings),
        ("KRR correctness", krr_correctness),
        ("clustering correctness", clustering),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failed += usize::from(outcome.is_err());
        println!("criterion {:>2} {tag} {name}: {detail}", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}



