//! Randomly pivoted Cholesky.
//!
//! Three variants: a dense reference that updates the full residual matrix,
//! the factored version that touches one column of A per pivot, and a blocked
//! version that draws several pivots per round and eliminates them jointly.
//! Pivots are drawn with probability proportional to the residual diagonal.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::factor::{CholeskyBuilder, NystromFactor, PivotTrace, StopRule};
use crate::linalg::{check_symmetric, pinv_symmetric};
use crate::oracle::EntryOracle;
use crate::rng::sample_proportional;

/// Largest input accepted by the dense reference implementation.
pub const NAIVE_MAX_DIM: usize = 2000;

/// Output of the dense reference implementation.
#[derive(Debug, Clone)]
pub struct NaiveRun {
    /// The Nyström approximation built so far.
    pub approximation: DMatrix<f64>,
    /// The Schur complement `A - approximation`.
    pub residual: DMatrix<f64>,
    pub pivots: Vec<usize>,
    pub trace: PivotTrace,
}

/// Dense reference: every step updates the full N x N residual. O(k N^2).
pub fn rpcholesky_naive<R: Rng + ?Sized>(
    a: &DMatrix<f64>,
    stop: StopRule,
    rng: &mut R,
) -> Result<NaiveRun> {
    stop.validate()?;
    naive_driver(a, stop, |residual_diag, total| Some(sample_proportional(rng, residual_diag, total)))
}

/// Dense reference with a prescribed pivot order instead of random draws.
pub fn partial_cholesky_naive(a: &DMatrix<f64>, pivots: &[usize]) -> Result<NaiveRun> {
    let n = a.nrows();
    if let Some(&bad) = pivots.iter().find(|&&p| p >= n) {
        return Err(Error::IndexOutOfRange { index: bad, dim: n });
    }
    let mut next = pivots.iter().copied();
    naive_driver(a, StopRule::FixedRank(pivots.len().max(1)), |_, _| next.next())
}

fn naive_driver<F>(a: &DMatrix<f64>, stop: StopRule, mut choose: F) -> Result<NaiveRun>
where
    F: FnMut(&[f64], f64) -> Option<usize>,
{
    let n = a.nrows();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if n > NAIVE_MAX_DIM {
        return Err(invalid(format!("dense reference limited to N <= {NAIVE_MAX_DIM}, got {n}")));
    }
    check_symmetric(a, 1e-12)?;

    let mut residual = a.clone();
    let mut approximation = DMatrix::zeros(n, n);
    let mut diag: Vec<f64> = (0..n).map(|i| residual[(i, i)].max(0.0)).collect();
    let initial_trace: f64 = diag.iter().sum();
    let floor = f64::EPSILON * initial_trace * n as f64;
    let mut pivots = Vec::new();
    let mut history = Vec::new();
    let mut rejected = 0;
    let mut requested = 0;

    loop {
        let total: f64 = diag.iter().sum();
        let done = pivots.len() >= n
            || match stop {
                StopRule::FixedRank(k) => pivots.len() >= k,
                StopRule::Tolerance(eta) => total <= eta * initial_trace,
            };
        if done || total <= floor {
            break;
        }
        let Some(s) = choose(&diag, total) else { break };
        requested += 1;
        let pivot = residual[(s, s)];
        if diag[s] <= floor || pivot <= floor {
            diag[s] = 0.0;
            rejected += 1;
            continue;
        }
        let col = residual.column(s).into_owned();
        let update = &col * col.transpose() / pivot;
        approximation += &update;
        residual -= &update;
        for (i, d) in diag.iter_mut().enumerate() {
            *d = residual[(i, i)].max(0.0);
        }
        pivots.push(s);
        history.push(diag.iter().sum());
    }

    let trace = PivotTrace {
        initial_trace,
        residual_trace_history: history,
        entry_evals: (n * n) as u64,
        accepted: pivots.len(),
        requested,
        rejected_pivots: rejected,
    };
    Ok(NaiveRun { approximation, residual, pivots, trace })
}

/// Factored RPCholesky: `(k + 1) N` entry evaluations for `k` accepted pivots
/// and O(k^2 N) arithmetic.
///
/// A drawn pivot whose residual diagonal is at or below `eps * tr(A) * N` is
/// rejected (its diagonal is zeroed) and a new one is drawn. The run ends early
/// when the whole residual trace is below that floor.
///
/// `oracle` should not be shared with concurrent work while this runs, since
/// the trace reports the change in its evaluation tally.
pub fn rpcholesky<R: Rng + ?Sized>(
    oracle: &EntryOracle,
    stop: StopRule,
    rng: &mut R,
) -> Result<(NystromFactor, PivotTrace)> {
    stop.validate()?;
    let mut b = CholeskyBuilder::new(oracle, stop.capacity(oracle.dim()));
    while !stop.satisfied(&b) && !b.exhausted() {
        let s = sample_proportional(rng, b.residual_diagonal(), b.residual_trace());
        b.note_requested(1);
        b.try_pivot(s)?;
    }
    Ok(b.finish())
}

/// Blocked RPCholesky: each round draws `min(block, k - i)` iid pivots from
/// the current residual diagonal, drops duplicates and pivots below the
/// acceptance floor, and eliminates the rest together.
///
/// With `block == 1` this consumes the generator exactly like [`rpcholesky`]
/// and produces a bitwise identical factor.
pub fn rpcholesky_blocked<R: Rng + ?Sized>(
    oracle: &EntryOracle,
    k: usize,
    block: usize,
    rng: &mut R,
) -> Result<(NystromFactor, PivotTrace)> {
    if k == 0 {
        return Err(invalid("rank must be positive"));
    }
    if block == 0 {
        return Err(invalid("block size must be positive"));
    }
    let stop = StopRule::FixedRank(k);
    let mut b = CholeskyBuilder::new(oracle, k.min(oracle.dim()));
    let mut unique = Vec::with_capacity(block);
    while !stop.satisfied(&b) && !b.exhausted() {
        let draws = block.min(k - b.rank());
        let total = b.residual_trace();
        let sampled: Vec<usize> = (0..draws)
            .map(|_| sample_proportional(rng, b.residual_diagonal(), total))
            .collect();
        b.note_requested(draws);
        unique.clear();
        for s in sampled {
            if unique.contains(&s) {
                continue;
            }
            if b.residual_diagonal()[s] <= b.floor() {
                b.reject(s);
                continue;
            }
            unique.push(s);
        }
        // an empty round just redraws from the updated diagonal
        if !unique.is_empty() {
            b.try_block(&unique)?;
        }
    }
    Ok(b.finish())
}

/// Column Nyström approximation `A(:,S) A(S,S)^+ A(S,:)` formed densely.
///
/// The pseudoinverse drops eigenvalues of `A(S,S)` below
/// `max(|S|, N) * eps * sigma_max`. Costs `N |S|` entry evaluations.
pub fn nystrom_from_pivots(oracle: &EntryOracle, pivots: &[usize]) -> Result<DMatrix<f64>> {
    oracle.validate_indices(pivots)?;
    let n = oracle.dim();
    if pivots.is_empty() {
        return Ok(DMatrix::zeros(n, n));
    }
    let c = oracle.columns(pivots)?;
    let w = c.select_rows(pivots);
    let w = (&w + w.transpose()) * 0.5;
    let core = pinv_symmetric(&w, n);
    Ok(&c * core * c.transpose())
}
