//! Competing pivot rules: greedy (complete pivoting), uniform, diagonal, and
//! exact ridge-leverage-score sampling. All of them produce the same
//! [`NystromFactor`] / [`PivotTrace`] pair as [`crate::rpcholesky`].

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::factor::{factorize_pivots, CholeskyBuilder, NystromFactor, PivotTrace, StopRule};
use crate::linalg::solve_spd;
use crate::oracle::EntryOracle;
use crate::rng::sample_proportional;

/// Greedy pivoting: always the largest residual diagonal entry, lowest index
/// on ties. Deterministic; `(k + 1) N` entry evaluations.
pub fn greedy_pivots(oracle: &EntryOracle, stop: StopRule) -> Result<(NystromFactor, PivotTrace)> {
    stop.validate()?;
    let mut b = CholeskyBuilder::new(oracle, stop.capacity(oracle.dim()));
    while !stop.satisfied(&b) && !b.exhausted() {
        let d = b.residual_diagonal();
        let mut best = 0;
        for (j, &v) in d.iter().enumerate() {
            if v > d[best] {
                best = j;
            }
        }
        b.note_requested(1);
        b.try_pivot(best)?;
    }
    Ok(b.finish())
}

/// `k` pivots uniformly at random, with or without replacement. Repeated draws
/// are dropped before factorization.
pub fn uniform_pivots<R: Rng + ?Sized>(
    oracle: &EntryOracle,
    k: usize,
    replace: bool,
    rng: &mut R,
) -> Result<(NystromFactor, PivotTrace)> {
    let n = oracle.dim();
    if k == 0 {
        return Err(invalid("rank must be positive"));
    }
    let draws: Vec<usize> = if replace {
        (0..k).map(|_| rng.random_range(0..n)).collect()
    } else {
        if k > n {
            return Err(invalid(format!("cannot draw {k} distinct pivots from {n}")));
        }
        index::sample(rng, n, k).into_vec()
    };
    factorize_draws(oracle, &draws)
}

/// `k` iid pivots from `diag(A) / tr(A)`, non-adaptive.
pub fn diagonal_pivots<R: Rng + ?Sized>(
    oracle: &EntryOracle,
    k: usize,
    rng: &mut R,
) -> Result<(NystromFactor, PivotTrace)> {
    if k == 0 {
        return Err(invalid("rank must be positive"));
    }
    let mut b = CholeskyBuilder::new(oracle, k.min(oracle.dim()));
    let total = b.residual_trace();
    if total <= 0.0 {
        return Err(Error::ZeroTrace);
    }
    // all draws come from the original diagonal
    let draws: Vec<usize> =
        (0..k).map(|_| sample_proportional(rng, b.residual_diagonal(), total)).collect();
    b.note_requested(k);
    for s in dedup_in_order(&draws, oracle.dim()) {
        b.try_pivot(s)?;
    }
    Ok(b.finish())
}

fn dedup_in_order(draws: &[usize], n: usize) -> Vec<usize> {
    let mut unique = Vec::with_capacity(draws.len());
    let mut seen = vec![false; n];
    for &s in draws {
        if !std::mem::replace(&mut seen[s], true) {
            unique.push(s);
        }
    }
    unique
}

fn factorize_draws(oracle: &EntryOracle, draws: &[usize]) -> Result<(NystromFactor, PivotTrace)> {
    let (f, mut trace) = factorize_pivots(oracle, &dedup_in_order(draws, oracle.dim()))?;
    trace.requested = draws.len();
    Ok((f, trace))
}

/// Ridge leverage scores and the inclusion probabilities derived from them.
#[derive(Debug, Clone)]
pub struct RlsScores {
    pub lambda: f64,
    pub delta: f64,
    /// `diag(A (A + lambda I)^-1)`, each in [0, 1].
    pub scores: DVector<f64>,
    /// `min(1, 16 * score * log(sum(scores) / delta))`, clamped to [0, 1].
    pub probabilities: DVector<f64>,
}

impl RlsScores {
    /// The effective dimension `sum(scores)`.
    pub fn effective_dimension(&self) -> f64 {
        self.scores.sum()
    }

    pub fn expected_sample_size(&self) -> f64 {
        self.probabilities.sum()
    }
}

/// Exact ridge leverage scores by a dense symmetric solve. Intended for
/// N of at most a few thousand.
pub fn rls_scores_exact(a: &DMatrix<f64>, lambda: f64, delta: f64) -> Result<RlsScores> {
    if !(lambda > 0.0) {
        return Err(invalid(format!("ridge parameter must be positive, got {lambda}")));
    }
    if !(delta > 0.0 && delta < 0.125) {
        return Err(invalid(format!("failure probability must lie in (0, 1/8), got {delta}")));
    }
    let n = a.nrows();
    let shifted = a + DMatrix::identity(n, n) * lambda;
    // (A + lambda I)^-1 A has the same diagonal as A (A + lambda I)^-1
    let x = solve_spd(&shifted, a)?;
    let scores = DVector::from_fn(n, |i, _| x[(i, i)].clamp(0.0, 1.0));
    Ok(with_probabilities(scores, lambda, delta))
}

fn with_probabilities(scores: DVector<f64>, lambda: f64, delta: f64) -> RlsScores {
    let log_term = (scores.sum() / delta).ln();
    let probabilities = scores.map(|l| (16.0 * l * log_term).clamp(0.0, 1.0));
    RlsScores { lambda, delta, scores, probabilities }
}

/// Includes each index independently with its RLS probability, then
/// factorizes the included set. The sample size is random and may be zero.
///
/// Entry evaluations include the `N^2` needed to form A densely.
pub fn rls_pivots<R: Rng + ?Sized>(
    oracle: &EntryOracle,
    lambda: f64,
    delta: f64,
    rng: &mut R,
) -> Result<(NystromFactor, PivotTrace)> {
    let evals_before = oracle.evals();
    let a = oracle.to_dense();
    let scores = rls_scores_exact(&a, lambda, delta)?;
    rls_pivots_with_scores(oracle, &scores, rng).map(|(f, mut t)| {
        t.entry_evals = oracle.evals() - evals_before;
        (f, t)
    })
}

/// As [`rls_pivots`] with precomputed scores; only the factorization is
/// charged to the tally.
pub fn rls_pivots_with_scores<R: Rng + ?Sized>(
    oracle: &EntryOracle,
    scores: &RlsScores,
    rng: &mut R,
) -> Result<(NystromFactor, PivotTrace)> {
    let n = oracle.dim();
    if scores.probabilities.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: scores.probabilities.len() });
    }
    let included: Vec<usize> = scores
        .probabilities
        .iter()
        .enumerate()
        .filter(|&(_, &p)| rng.random::<f64>() < p)
        .map(|(i, _)| i)
        .collect();
    factorize_pivots(oracle, &included)
}

/// Finds the ridge parameter whose expected sample size `sum(p)` is closest
/// to `budget`, by bisection on `log(lambda)`. The scores are cached by the
/// caller if reused.
pub fn rls_lambda_for_budget(a: &DMatrix<f64>, budget: f64, delta: f64) -> Result<RlsScores> {
    let tr = a.trace();
    if tr <= 0.0 {
        return Err(Error::ZeroTrace);
    }
    let mut lo = (tr * 1e-14).ln();
    let mut hi = (tr * 1e4).ln();
    let mut best = rls_scores_exact(a, hi.exp(), delta)?;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let s = rls_scores_exact(a, mid.exp(), delta)?;
        // sample size decreases as lambda grows
        if s.expected_sample_size() > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        let better = (s.expected_sample_size() - budget).abs()
            < (best.expected_sample_size() - budget).abs();
        if better {
            best = s;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use nalgebra::dvector;

    fn diag_oracle(values: &[f64]) -> EntryOracle {
        EntryOracle::explicit(DMatrix::from_diagonal(&DVector::from_column_slice(values))).unwrap()
    }

    #[test]
    fn greedy_examples() {
        let (f, trace) = greedy_pivots(&diag_oracle(&[3.0, 2.0, 1.0]), StopRule::FixedRank(3)).unwrap();
        assert_eq!(f.pivots(), &[0, 1, 2]);
        assert_eq!(trace.entry_evals, 4 * 3);
        let (f, _) = greedy_pivots(&diag_oracle(&[1.0, 1.0]), StopRule::FixedRank(1)).unwrap();
        assert_eq!(f.pivots(), &[0]);
        let (f, _) = greedy_pivots(&diag_oracle(&[1.0, 2.0, 3.0]), StopRule::FixedRank(2)).unwrap();
        assert_eq!(f.pivots(), &[2, 1]);
    }

    #[test]
    fn uniform_without_replacement_is_a_permutation() {
        let (f, _) = uniform_pivots(&diag_oracle(&[1.0; 4]), 4, false, &mut seeded(3)).unwrap();
        let mut p = f.pivots().to_vec();
        p.sort_unstable();
        assert_eq!(p, vec![0, 1, 2, 3]);
        assert!(uniform_pivots(&diag_oracle(&[1.0; 4]), 5, false, &mut seeded(3)).is_err());
    }

    #[test]
    fn uniform_identity_residual_counts_unique() {
        let n = 10;
        for seed in 0..20 {
            let (f, trace) =
                uniform_pivots(&diag_oracle(&vec![1.0; n]), 6, true, &mut seeded(seed)).unwrap();
            let mut u = f.pivots().to_vec();
            u.sort_unstable();
            u.dedup();
            assert_eq!(u.len(), f.rank());
            assert_eq!(trace.final_residual_trace(), (n - u.len()) as f64);
            assert_eq!(trace.requested, 6);
            assert!(trace.entry_evals <= 7 * n as u64);
        }
    }

    #[test]
    fn diagonal_point_mass() {
        for seed in 0..10 {
            let (f, _) = diagonal_pivots(&diag_oracle(&[1.0, 0.0, 0.0]), 1, &mut seeded(seed)).unwrap();
            assert_eq!(f.pivots(), &[0]);
        }
        assert!(matches!(
            diagonal_pivots(&diag_oracle(&[0.0, 0.0]), 1, &mut seeded(0)),
            Err(Error::ZeroTrace)
        ));
    }

    #[test]
    fn rls_score_examples() {
        let s = rls_scores_exact(&DMatrix::identity(5, 5), 1.0, 0.1).unwrap();
        assert!(s.scores.iter().all(|&l| (l - 0.5).abs() < 1e-15));
        let s = rls_scores_exact(&DMatrix::from_diagonal(&dvector![3.0, 1.0]), 1.0, 0.1).unwrap();
        assert!((s.scores[0] - 0.75).abs() < 1e-15);
        assert!((s.scores[1] - 0.5).abs() < 1e-15);
        assert!(rls_scores_exact(&DMatrix::identity(2, 2), 0.0, 0.1).is_err());
        assert!(rls_scores_exact(&DMatrix::identity(2, 2), 1.0, 0.2).is_err());
    }

    #[test]
    fn rls_identity_includes_everything() {
        // p_j = min(1, 16 * 0.5 * ln(1 / 0.1)) = 1
        let s = rls_scores_exact(&DMatrix::identity(2, 2), 1.0, 0.1).unwrap();
        assert_eq!(s.probabilities.as_slice(), &[1.0, 1.0]);
        for seed in 0..10 {
            let (f, _) = rls_pivots(&diag_oracle(&[1.0, 1.0]), 1.0, 0.1, &mut seeded(seed)).unwrap();
            assert_eq!(f.pivots(), &[0, 1]);
        }
    }

    #[test]
    fn rls_counts_dense_formation() {
        let n = 12;
        let (f, trace) = rls_pivots(&diag_oracle(&vec![1.0; n]), 1.0, 0.1, &mut seeded(0)).unwrap();
        assert_eq!(trace.entry_evals, (n * n + n + n * f.rank()) as u64);
    }

    #[test]
    fn lambda_search_hits_budget() {
        let a = crate::generators::powerlaw_psd(80, 1.0, 2).unwrap();
        let s = rls_lambda_for_budget(&a, 20.0, 0.1).unwrap();
        assert!((s.expected_sample_size() - 20.0).abs() < 0.5, "{}", s.expected_sample_size());
    }
}
