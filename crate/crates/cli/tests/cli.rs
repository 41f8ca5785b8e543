use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rpchol::experiment::read_rows;
use rpchol::model_io::{read_cluster_model, read_factor, read_krr_model};
use tempfile::TempDir;

fn rpchol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpchol")).args(args).output().expect("spawn rpchol")
}

fn ok(args: &[&str]) -> String {
    let out = rpchol(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Fails with a single `error:` line on stderr.
fn fails(args: &[&str]) -> String {
    let out = rpchol(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let err = String::from_utf8(out.stderr).unwrap();
    err.trim().to_string()
}

struct Dir(TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }
    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_string()
    }
}

fn field(line: &str, key: &str) -> f64 {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {line}"))
        .parse()
        .unwrap()
}

fn reader(path: &Path) -> std::io::BufReader<std::fs::File> {
    std::io::BufReader::new(std::fs::File::open(path).unwrap())
}

fn line_count(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn factorize_kernel_matrix_from_points() {
    let d = Dir::new();
    ok(&["gen", "smile", "--n", "300", "--seed", "1", "-o", &d.arg("smile.csv")]);
    assert_eq!(line_count(&d.path("smile.csv")), 300);
    let out = ok(&[
        "factorize", "--points", &d.arg("smile.csv"), "--kernel", "gaussian", "--bandwidth", "0.25",
        "--k", "40", "--seed", "3", "-o", &d.arg("f.txt"), "--history", &d.arg("h.csv"),
    ]);
    assert_eq!(field(&out, "pivots"), 40.0);
    assert_eq!(field(&out, "entry_evals"), (41 * 300) as f64);
    let f = read_factor(reader(&d.path("f.txt"))).unwrap();
    assert_eq!(f.rank(), 40);
    assert_eq!(line_count(&d.path("h.csv")), 40);
    assert!(field(&out, "relative_residual") < 0.1);
}

#[test]
fn factorize_with_tolerance_on_explicit_matrix() {
    let d = Dir::new();
    ok(&["gen", "powerlaw", "--n", "120", "--exponent", "2", "--seed", "4", "-o", &d.arg("a.csv")]);
    let out = ok(&[
        "factorize", "--matrix", &d.arg("a.csv"), "--tol", "1e-2", "--seed", "5", "-o", &d.arg("f.txt"),
    ]);
    assert!(field(&out, "relative_residual") <= 1e-2);
    // same seed, same factor
    ok(&["factorize", "--matrix", &d.arg("a.csv"), "--tol", "1e-2", "--seed", "5", "-o", &d.arg("g.txt")]);
    assert_eq!(std::fs::read(d.path("f.txt")).unwrap(), std::fs::read(d.path("g.txt")).unwrap());
}

#[test]
fn krr_writes_model_and_predictions() {
    let d = Dir::new();
    ok(&["gen", "regression", "--n", "400", "--d", "3", "--seed", "6", "-o", &d.arg("train.csv")]);
    ok(&["gen", "regression", "--n", "100", "--d", "3", "--seed", "7", "-o", &d.arg("test.csv")]);
    let out = ok(&[
        "krr", "--train", &d.arg("train.csv"), "--test", &d.arg("test.csv"), "--bandwidth", "3",
        "--lambda", "1e-6", "--k", "100", "--seed", "8", "--model", &d.arg("m.txt"),
        "--predictions", &d.arg("p.csv"),
    ]);
    let smape = field(&out, "smape");
    assert!((0.0..1.0).contains(&smape), "{out}");
    assert_eq!(line_count(&d.path("p.csv")), 100);
    let model = read_krr_model(reader(&d.path("m.txt"))).unwrap();
    assert_eq!(model.pivots.len(), field(&out, "pivots") as usize);
}

#[test]
fn cluster_separated_blobs() {
    let d = Dir::new();
    ok(&[
        "gen", "blobs", "--n", "400", "-c", "3", "--seed", "9", "-o", &d.arg("x.csv"),
        "--labels", &d.arg("y.csv"),
    ]);
    let out = ok(&[
        "cluster", "--data", &d.arg("x.csv"), "--bandwidth", "2", "--k", "30", "-m", "3", "-c", "3",
        "--restarts", "3", "--seed", "10", "--labels", &d.arg("labels.csv"), "--reference", &d.arg("y.csv"),
        "--model", &d.arg("model.txt"),
    ]);
    assert!(field(&out, "clustering_error") <= 0.02, "{out}");
    assert_eq!(line_count(&d.path("labels.csv")), 400);
    let model = read_cluster_model(reader(&d.path("model.txt"))).unwrap();
    assert_eq!(model.labels.len(), 400);
}

#[test]
fn compare_to_stdout_and_overrides() {
    let d = Dir::new();
    std::fs::write(
        d.path("c.toml"),
        "experiment = \"small\"\nranks = [4]\nstrategies = [\"greedy\"]\n[matrix]\nkind = \"powerlaw\"\nn = 80\nexponent = 1.5\n",
    )
    .unwrap();
    let out = ok(&[
        "compare", "--config", &d.arg("c.toml"), "--seed", "2", "--trials", "3", "--ranks", "2,8",
        "--strategies", "rpcholesky,uniform",
    ]);
    let rows = read_rows(out.as_bytes()).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 3);
    assert!(rows.iter().all(|r| r.wall_ms.is_none() && r.experiment == "small"));
    assert!(out.starts_with("experiment,strategy,k,trial,rel_trace_error,entry_evals,wall_ms,extra"));
}

#[test]
fn verify_suites_report_pass() {
    let out = ok(&["verify", "phi", "--pairs", "20", "--seed", "1"]);
    assert_eq!(out.lines().last(), Some("PASS"));
    let out = ok(&["verify", "doubling", "--n", "60", "--ks", "1,2", "--trials", "500", "--seed", "2"]);
    assert_eq!(out.lines().last(), Some("PASS"));
    let out = ok(&["verify", "bound", "--n", "200", "--r", "3", "--eps", "0.5", "--trials", "30", "--seed", "3"]);
    assert_eq!(out.lines().last(), Some("PASS"));
}

#[test]
fn gen_worst_case_matrices() {
    let d = Dir::new();
    ok(&["gen", "greedy-worstcase", "--n", "50", "-o", &d.arg("g.csv")]);
    assert_eq!(line_count(&d.path("g.csv")), 50);
    ok(&["gen", "uniform-worstcase", "--n", "30", "--m", "5", "--r", "3", "--delta", "0.1", "-o", &d.arg("u.csv")]);
    assert_eq!(line_count(&d.path("u.csv")), 30);
    let err = fails(&["gen", "powerlaw", "--n", "7", "--seed", "1"]);
    assert!(err.starts_with("error:") && err.contains("--out"), "{err}");
}

#[test]
fn bad_inputs_fail_with_one_line() {
    let d = Dir::new();
    std::fs::write(d.path("bad.csv"), "1,2\n3,4\n").unwrap();
    let err = fails(&["factorize", "--matrix", &d.arg("bad.csv"), "--k", "1", "--seed", "1", "-o", &d.arg("f")]);
    assert!(err.starts_with("error:") && !err.contains('\n'), "{err}");

    let err = fails(&["factorize", "--matrix", &d.arg("missing.csv"), "--k", "1", "--seed", "1", "-o", &d.arg("f")]);
    assert!(err.starts_with("error:") && !err.contains('\n'), "{err}");

    std::fs::write(d.path("c.toml"), "experiment = \"x\"\nranks = [1]\nstrategies = [\"nope\"]\n[matrix]\nkind = \"smile\"\n").unwrap();
    let err = fails(&["compare", "--config", &d.arg("c.toml"), "--seed", "1"]);
    assert!(err.starts_with("error:") && !err.contains('\n'), "{err}");
}

#[test]
fn seed_is_required() {
    let err = fails(&["gen", "smile", "--n", "10"]);
    assert!(err.contains("--seed"), "{err}");
    let err = fails(&["verify", "phi"]);
    assert!(err.contains("--seed"), "{err}");
}
