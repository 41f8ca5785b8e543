//! Monte Carlo checks of the approximation guarantees for RPCholesky and of
//! the greedy worst case. Each suite returns a report with a `passed` flag;
//! trial `t` uses stream `t` of the given seed.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::greedy_pivots;
use crate::error::{invalid, Error, Result};
use crate::experiment::mean_and_stderr;
use crate::factor::StopRule;
use crate::generators::{gen_greedy_worstcase, random_psd};
use crate::linalg::{best_rank_r_error, expected_residual_map, min_eigenvalue, sym_eig, tail_sum};
use crate::oracle::EntryOracle;
use crate::rng::{seeded, stream_rng};
use crate::rpcholesky::{rpcholesky, rpcholesky_naive};

/// Largest matrix the bound check accepts; every trial needs the spectrum.
pub const BOUND_MAX_DIM: usize = 1000;
/// Relative tail below which a matrix is treated as exactly rank r.
pub const EXACT_RANK_TOL: f64 = 1e-12;

/// `max(log x, 0)`.
pub fn log_plus(x: f64) -> f64 {
    x.ln().max(0.0)
}

/// The two column counts whose minimum guarantees an (r, eps)-approximation
/// in expectation: `r/eps + r log+(1/(eps eta))` and
/// `r/eps + r + r log+(2^r / eps)`.
pub fn bound_rank_branches(r: usize, eps: f64, eta: f64) -> (f64, f64) {
    let r_f = r as f64;
    let log_branch = r_f / eps + r_f * log_plus(1.0 / (eps * eta));
    let doubling_branch = r_f / eps + r_f + r_f * log_plus(2f64.powf(r_f) / eps);
    (log_branch, doubling_branch)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub n: usize,
    pub r: usize,
    pub eps: f64,
    pub trials: usize,
    pub trace: f64,
    /// tr(A - [[A]]_r).
    pub best_rank_error: f64,
    /// best_rank_error / tr A.
    pub eta: f64,
    pub k_log_branch: f64,
    pub k_doubling_branch: f64,
    /// Columns used: the ceiling of the smaller branch, or r when eta = 0.
    pub k: usize,
    /// (1 + eps) tr(A - [[A]]_r), or `1e-10 tr A` in the exact-rank case.
    pub bound: f64,
    /// Monte Carlo mean of tr(A - A_hat).
    pub mean_residual: f64,
    pub std_err: f64,
    pub max_residual: f64,
    /// The input has rank r; the check is exactness at k = r instead.
    pub exact_rank: bool,
    pub passed: bool,
}

/// Runs RPCholesky `trials` times with the column count from the bound and
/// compares the mean residual trace to `(1 + eps) tr(A - [[A]]_r)` with a
/// three-standard-error allowance. For exactly rank-r input, checks that r
/// pivots leave a residual trace at most `1e-10 tr A`.
pub fn verify_bound(a: &DMatrix<f64>, r: usize, eps: f64, trials: usize, seed: u64) -> Result<BoundReport> {
    let n = a.nrows();
    if n > BOUND_MAX_DIM {
        return Err(invalid(format!("bound check is limited to N <= {BOUND_MAX_DIM}, got {n}")));
    }
    if r == 0 || r > n || !(eps > 0.0) || trials == 0 {
        return Err(invalid("need 1 <= r <= N, eps > 0 and trials >= 1"));
    }
    let oracle = EntryOracle::explicit(a.clone())?;
    let trace = a.trace();
    if trace <= 0.0 {
        return Err(Error::ZeroTrace);
    }
    let best_rank_error = best_rank_r_error(a, r)?;
    let eta = best_rank_error / trace;
    let exact_rank = eta <= EXACT_RANK_TOL;
    let (k_log_branch, k_doubling_branch) = bound_rank_branches(r, eps, eta.max(f64::MIN_POSITIVE));
    let k = if exact_rank { r } else { (k_log_branch.min(k_doubling_branch).ceil() as usize).min(n) };
    let residuals = monte_carlo_residuals(&oracle, k, trials, seed)?;
    let (mean_residual, std_err) = mean_and_stderr(&residuals);
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    let (bound, passed) = if exact_rank {
        let bound = 1e-10 * trace;
        (bound, max_residual <= bound)
    } else {
        let bound = (1.0 + eps) * best_rank_error;
        (bound, mean_residual <= bound + 3.0 * std_err)
    };
    Ok(BoundReport {
        n,
        r,
        eps,
        trials,
        trace,
        best_rank_error,
        eta,
        k_log_branch,
        k_doubling_branch,
        k,
        bound,
        mean_residual,
        std_err,
        max_residual,
        exact_rank,
        passed,
    })
}

/// Residual trace tr A - ||F||^2 (clamped at zero) of `trials` independent
/// rank-k runs.
fn monte_carlo_residuals(oracle: &EntryOracle, k: usize, trials: usize, seed: u64) -> Result<Vec<f64>> {
    let trace = oracle.trace_uncounted();
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let (f, _) = rpcholesky(&oracle.fresh(), StopRule::FixedRank(k), &mut stream_rng(seed, t as u64))?;
            Ok((trace - f.frobenius_norm_squared()).max(0.0))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DoublingReport {
    pub k: usize,
    pub trials: usize,
    pub mean_residual: f64,
    pub std_err: f64,
    /// 2^k tr(A - [[A]]_k).
    pub bound: f64,
    pub passed: bool,
}

/// Checks `E tr A^(k) <= 2^k tr(A - [[A]]_k)` for each k, with three
/// standard errors of slack.
pub fn verify_doubling(a: &DMatrix<f64>, ks: &[usize], trials: usize, seed: u64) -> Result<Vec<DoublingReport>> {
    let oracle = EntryOracle::explicit(a.clone())?;
    let eig = sym_eig(a)?;
    ks.iter()
        .map(|&k| {
            let residuals = monte_carlo_residuals(&oracle, k, trials, seed)?;
            let (mean_residual, std_err) = mean_and_stderr(&residuals);
            let bound = 2f64.powi(k as i32) * tail_sum(&eig.eigenvalues, k);
            Ok(DoublingReport { k, trials, mean_residual, std_err, bound, passed: mean_residual <= bound + 3.0 * std_err })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExpectedResidualReport {
    pub trials: usize,
    /// Entrywise Monte Carlo mean of A^(1).
    pub mean: DMatrix<f64>,
    pub std_err: DMatrix<f64>,
    /// Phi(A) = A - A^2 / tr A.
    pub expected: DMatrix<f64>,
    /// Largest |mean - expected| / std_err over entries.
    pub max_z: f64,
    pub passed: bool,
}

/// Averages the residual after one random pivot over `trials` draws and
/// compares each entry with `Phi(A)` (three standard errors).
pub fn verify_expected_residual(a: &DMatrix<f64>, trials: usize, seed: u64) -> Result<ExpectedResidualReport> {
    if trials < 2 {
        return Err(invalid("need at least two trials"));
    }
    let expected = expected_residual_map(a)?;
    let n = a.nrows();
    let mut rng = seeded(seed);
    let mut sum = DMatrix::zeros(n, n);
    let mut sum_sq = DMatrix::zeros(n, n);
    for _ in 0..trials {
        let run = rpcholesky_naive(a, StopRule::FixedRank(1), &mut rng)?;
        sum += &run.residual;
        sum_sq += run.residual.component_mul(&run.residual);
    }
    let t = trials as f64;
    let mean = &sum / t;
    let std_err = DMatrix::from_fn(n, n, |i, j| {
        let var = (sum_sq[(i, j)] / t - mean[(i, j)].powi(2)).max(0.0) * t / (t - 1.0);
        (var / t).sqrt()
    });
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let mut max_z: f64 = 0.0;
    let mut passed = true;
    for i in 0..n {
        for j in 0..n {
            let gap = (mean[(i, j)] - expected[(i, j)]).abs();
            if std_err[(i, j)] > 1e-14 * scale {
                let z = gap / std_err[(i, j)];
                max_z = max_z.max(z);
                passed &= z <= 3.0;
            } else {
                // a deterministic entry must match to roundoff
                passed &= gap <= 1e-12 * scale;
            }
        }
    }
    Ok(ExpectedResidualReport { trials, mean, std_err, expected, max_z, passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiPropertiesReport {
    pub pairs: usize,
    /// Smallest min eig Phi(A) / tr A seen.
    pub worst_positivity: f64,
    /// Smallest min eig (Phi(A + H) - Phi(A)) / tr(A + H) seen.
    pub worst_monotonicity: f64,
    /// Smallest min eig (Phi(tA + (1-t)H) - t Phi(A) - (1-t) Phi(H)) / (tr A + tr H) seen.
    pub worst_concavity: f64,
    pub slack: f64,
    pub passed: bool,
}

/// Spot-checks that Phi is positive, monotone and concave on random psd
/// pairs of size at most 20 with varied ranks and scales.
pub fn verify_phi_properties(pairs: usize, seed: u64) -> Result<PhiPropertiesReport> {
    const SLACK: f64 = 1e-10;
    let mut rng = seeded(seed);
    let mut worst = [f64::INFINITY; 3];
    for _ in 0..pairs {
        let n = rng.random_range(2..=20);
        let a = random_psd(n, rng.random_range(1..=n), rng.random()) * 10f64.powf(rng.random_range(-2.0..2.0));
        let h = random_psd(n, rng.random_range(1..=n), rng.random()) * 10f64.powf(rng.random_range(-2.0..2.0));
        let phi_a = expected_residual_map(&a)?;
        let phi_h = expected_residual_map(&h)?;
        worst[0] = worst[0].min(min_eigenvalue(&phi_a) / a.trace());
        let sum = &a + &h;
        worst[1] = worst[1].min(min_eigenvalue(&(expected_residual_map(&sum)? - &phi_a)) / sum.trace());
        for theta in [0.25, 0.5, 0.75] {
            let mix = &a * theta + &h * (1.0 - theta);
            let gap = expected_residual_map(&mix)? - &phi_a * theta - &phi_h * (1.0 - theta);
            worst[2] = worst[2].min(min_eigenvalue(&gap) / (a.trace() + h.trace()));
        }
    }
    Ok(PhiPropertiesReport {
        pairs,
        worst_positivity: worst[0],
        worst_monotonicity: worst[1],
        worst_concavity: worst[2],
        slack: SLACK,
        passed: worst.iter().all(|&w| w >= -SLACK),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GreedyWorstCaseReport {
    pub n: usize,
    pub eta: f64,
    pub eps: f64,
    /// (1 + eps) eta.
    pub threshold: f64,
    /// Largest k the greedy claim is checked for: floor((1 - (1 + eps) eta) N) - 1.
    pub greedy_k_max: usize,
    /// Greedy relative error for k = 1..=greedy_k_max.
    pub greedy_errors: Vec<f64>,
    /// First k at which greedy reaches the threshold, if any.
    pub greedy_first_below: Option<usize>,
    pub rpcholesky_trials: usize,
    /// Mean RPCholesky relative error for k = 1..=rpcholesky_k_max.
    pub rpcholesky_mean_errors: Vec<f64>,
    pub rpcholesky_k_max: usize,
    pub rpcholesky_first_below: Option<usize>,
    pub greedy_stays_above: bool,
    pub rpcholesky_drops_below: bool,
    pub passed: bool,
}

/// Runs greedy and RPCholesky on the greedy worst-case matrix and reports
/// whether greedy stays above `(1 + eps) eta` for every k up to
/// `(1 - (1 + eps) eta) N - 1` while the RPCholesky mean drops below it by
/// `k = N / 4`.
pub fn verify_greedy_worstcase(n: usize, eta: f64, eps: f64, trials: usize, seed: u64) -> Result<GreedyWorstCaseReport> {
    let case = gen_greedy_worstcase(n, eta, eps)?;
    let threshold = (1.0 + eps) * eta;
    let greedy_k_max = case.k_max.floor().max(0.0) as usize;
    let rpcholesky_k_max = n / 4;
    let oracle = EntryOracle::explicit(case.matrix)?;
    let trace = oracle.trace_uncounted();

    let relative_curve = |history: &[f64], k_max: usize| -> Vec<f64> {
        // runs stop early once the residual is exhausted; the error stays put
        (1..=k_max)
            .map(|k| history.get(k - 1).or(history.last()).map_or(1.0, |&h| (h / trace).max(0.0)))
            .collect()
    };
    let (_, greedy_trace) = greedy_pivots(&oracle.fresh(), StopRule::FixedRank(greedy_k_max.max(1)))?;
    let greedy_errors = relative_curve(&greedy_trace.residual_trace_history, greedy_k_max);
    let curves: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (_, tr) = rpcholesky(
                &oracle.fresh(),
                StopRule::FixedRank(rpcholesky_k_max),
                &mut stream_rng(seed, t as u64),
            )?;
            Ok(relative_curve(&tr.residual_trace_history, rpcholesky_k_max))
        })
        .collect::<Result<_>>()?;
    let rpcholesky_mean_errors: Vec<f64> = (0..rpcholesky_k_max)
        .map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / trials as f64)
        .collect();
    let first_at_or_below = |errs: &[f64]| errs.iter().position(|&e| e <= threshold).map(|i| i + 1);
    let first_below = |errs: &[f64]| errs.iter().position(|&e| e < threshold).map(|i| i + 1);
    let greedy_first_below = first_at_or_below(&greedy_errors);
    let rpcholesky_first_below = first_below(&rpcholesky_mean_errors);
    let greedy_stays_above = greedy_first_below.is_none();
    let rpcholesky_drops_below = rpcholesky_first_below.is_some();
    Ok(GreedyWorstCaseReport {
        n,
        eta,
        eps,
        threshold,
        greedy_k_max,
        greedy_errors,
        greedy_first_below,
        rpcholesky_trials: trials,
        rpcholesky_mean_errors,
        rpcholesky_k_max,
        rpcholesky_first_below,
        greedy_stays_above,
        rpcholesky_drops_below,
        passed: greedy_stays_above && rpcholesky_drops_below,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::powerlaw_psd;

    #[test]
    fn branches_match_formula() {
        let (a, b) = bound_rank_branches(5, 0.5, 0.1);
        assert!((a - (10.0 + 5.0 * 20f64.ln())).abs() < 1e-12);
        assert!((b - (15.0 + 5.0 * 64f64.ln())).abs() < 1e-12);
        // log+ clips at zero
        let (a, _) = bound_rank_branches(2, 4.0, 0.9);
        assert_eq!(a, 0.5);
    }

    #[test]
    fn exact_rank_switches_to_exactness() {
        let a = random_psd(40, 3, 9);
        let rep = verify_bound(&a, 3, 0.5, 5, 1).unwrap();
        assert!(rep.exact_rank);
        assert_eq!(rep.k, 3);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn small_bound_check() {
        let a = powerlaw_psd(80, 1.5, 2).unwrap();
        let rep = verify_bound(&a, 3, 1.0, 20, 3).unwrap();
        assert!(!rep.exact_rank);
        assert!(rep.k as f64 >= rep.k_log_branch.min(rep.k_doubling_branch));
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn expected_residual_small() {
        let a = random_psd(4, 4, 5);
        let rep = verify_expected_residual(&a, 4000, 6).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn phi_properties_hold() {
        assert!(verify_phi_properties(10, 4).unwrap().passed);
    }

    #[test]
    fn doubling_small() {
        let a = random_psd(30, 30, 2);
        for rep in verify_doubling(&a, &[1, 2], 200, 8).unwrap() {
            assert!(rep.passed, "{rep:?}");
        }
    }
}
