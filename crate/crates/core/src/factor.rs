//! Nyström factors, per-run diagnostics, and the factored partial-Cholesky
//! recurrence shared by every pivot strategy.

use nalgebra::{DMatrix, DMatrixView};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::oracle::EntryOracle;

/// When to stop adding pivots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Accept exactly `k` pivots, or fewer if the residual vanishes first.
    FixedRank(usize),
    /// Stop once the residual trace is at most `eta * tr A`.
    Tolerance(f64),
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StopRule::FixedRank(0) => Err(invalid("rank must be positive")),
            StopRule::Tolerance(eta) if !(eta > 0.0 && eta < 1.0) => {
                Err(invalid(format!("tolerance must lie in (0, 1), got {eta}")))
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn capacity(&self, n: usize) -> usize {
        match *self {
            StopRule::FixedRank(k) => k.min(n),
            StopRule::Tolerance(_) => n.min(64),
        }
    }

    pub(crate) fn satisfied(&self, builder: &CholeskyBuilder<'_>) -> bool {
        if builder.rank() >= builder.n {
            return true;
        }
        match *self {
            StopRule::FixedRank(k) => builder.rank() >= k,
            StopRule::Tolerance(eta) => builder.residual_trace() <= eta * builder.initial_trace,
        }
    }
}

/// A column Nyström approximation `A ≈ F F^T` with its pivot set.
///
/// Column `i` of `F` belongs to pivot `pivots[i]`; entries of column `i` at
/// rows `pivots[..i]` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NystromFactor {
    f: DMatrix<f64>,
    pivots: Vec<usize>,
}

impl NystromFactor {
    pub fn new(f: DMatrix<f64>, pivots: Vec<usize>) -> Result<Self> {
        if f.ncols() != pivots.len() {
            return Err(invalid(format!(
                "factor has {} columns but {} pivots",
                f.ncols(),
                pivots.len()
            )));
        }
        Ok(Self { f, pivots })
    }

    pub fn empty(n: usize) -> Self {
        Self { f: DMatrix::zeros(n, 0), pivots: Vec::new() }
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn dim(&self) -> usize {
        self.f.nrows()
    }

    /// The dense approximation `F F^T`.
    pub fn approximation(&self) -> DMatrix<f64> {
        &self.f * self.f.transpose()
    }

    /// `||F||_F^2 = tr(F F^T)`.
    pub fn frobenius_norm_squared(&self) -> f64 {
        self.f.norm_squared()
    }

    pub fn into_parts(self) -> (DMatrix<f64>, Vec<usize>) {
        (self.f, self.pivots)
    }
}

/// Diagnostics for one factorization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotTrace {
    /// tr A before any pivot.
    pub initial_trace: f64,
    /// Residual trace after each accepted pivot.
    pub residual_trace_history: Vec<f64>,
    /// Scalar entry evaluations consumed by the run.
    pub entry_evals: u64,
    /// Pivots accepted (columns of F).
    pub accepted: usize,
    /// Pivots requested by the strategy before deduplication.
    pub requested: usize,
    /// Drawn pivots discarded because their residual diagonal fell below the
    /// acceptance floor.
    pub rejected_pivots: usize,
}

impl PivotTrace {
    pub fn final_residual_trace(&self) -> f64 {
        self.residual_trace_history.last().copied().unwrap_or(self.initial_trace)
    }

    pub fn relative_residual(&self) -> f64 {
        if self.initial_trace <= 0.0 {
            0.0
        } else {
            (self.final_residual_trace() / self.initial_trace).max(0.0)
        }
    }
}

/// Incremental partial Cholesky on an [`EntryOracle`].
///
/// Holds `F` column-major, the residual diagonal `d`, and the acceptance
/// floor `eps * tr(A) * N`. Each accepted pivot `s` costs one column of A:
/// `g = A(:,s) - F F(s,:)^T`, `F(:,i) = g / sqrt(g_s)`, `d -= F(:,i)^2`.
pub(crate) struct CholeskyBuilder<'a> {
    oracle: &'a EntryOracle,
    n: usize,
    cols: Vec<f64>,
    pivots: Vec<usize>,
    d: Vec<f64>,
    initial_trace: f64,
    floor: f64,
    history: Vec<f64>,
    rejected: usize,
    requested: usize,
    evals_start: u64,
    scratch: Vec<f64>,
}

impl<'a> CholeskyBuilder<'a> {
    /// Reads the diagonal (N evaluations).
    pub fn new(oracle: &'a EntryOracle, capacity: usize) -> Self {
        let n = oracle.dim();
        let evals_start = oracle.evals();
        let d: Vec<f64> = oracle.diagonal().iter().map(|&x| x.max(0.0)).collect();
        let initial_trace: f64 = d.iter().sum();
        Self {
            oracle,
            n,
            cols: Vec::with_capacity(n * capacity),
            pivots: Vec::with_capacity(capacity),
            d,
            initial_trace,
            floor: f64::EPSILON * initial_trace * n as f64,
            history: Vec::with_capacity(capacity),
            rejected: 0,
            requested: 0,
            evals_start,
            scratch: vec![0.0; n],
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn residual_diagonal(&self) -> &[f64] {
        &self.d
    }

    pub fn residual_trace(&self) -> f64 {
        self.d.iter().sum()
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// True once nothing above the floor is left to eliminate.
    pub fn exhausted(&self) -> bool {
        self.residual_trace() <= self.floor
    }

    pub fn note_requested(&mut self, count: usize) {
        self.requested += count;
    }

    /// Discards pivot `s`: its residual is numerically zero.
    pub fn reject(&mut self, s: usize) {
        self.d[s] = 0.0;
        self.rejected += 1;
    }

    /// Residual column `A(:,s) - F F(s,:)^T` into `out`.
    fn residual_column(&self, s: usize, out: &mut [f64]) -> Result<()> {
        self.oracle.column_into(s, out)?;
        let n = self.n;
        for c in 0..self.pivots.len() {
            let col = &self.cols[c * n..(c + 1) * n];
            let coef = col[s];
            if coef == 0.0 {
                continue;
            }
            for (o, &f) in out.iter_mut().zip(col) {
                *o -= coef * f;
            }
        }
        Ok(())
    }

    fn append_column(&mut self, s: usize, g: &[f64], root: f64) {
        let start = self.cols.len();
        self.cols.extend(g.iter().map(|&x| x / root));
        let col = &self.cols[start..];
        for (dj, &f) in self.d.iter_mut().zip(col) {
            *dj = (*dj - f * f).max(0.0);
        }
        self.pivots.push(s);
        self.history.push(self.d.iter().sum());
    }

    /// Eliminates pivot `s`. Returns whether it was accepted.
    pub fn try_pivot(&mut self, s: usize) -> Result<bool> {
        if self.d[s] <= self.floor {
            self.reject(s);
            return Ok(false);
        }
        let mut g = std::mem::take(&mut self.scratch);
        let res = self.residual_column(s, &mut g);
        let accepted = match res {
            Ok(()) => {
                let gs = g[s];
                if gs > self.floor {
                    self.append_column(s, &g, gs.sqrt());
                    true
                } else {
                    self.reject(s);
                    false
                }
            }
            Err(e) => {
                self.scratch = g;
                return Err(e);
            }
        };
        self.scratch = g;
        Ok(accepted)
    }

    /// Eliminates the distinct pivots `block` jointly: one batched column
    /// evaluation and product against `F`, then a left-looking Cholesky of
    /// `G(U,U)` that skips pivots whose in-block residual falls below
    /// `max(floor, eps * tr G(U,U) * |U|)`. Returns the number accepted.
    pub fn try_block(&mut self, block: &[usize]) -> Result<usize> {
        if block.len() == 1 {
            return Ok(usize::from(self.try_pivot(block[0])?));
        }
        let n = self.n;
        let u = block.len();
        let mut g = self.oracle.columns(block)?;
        let k = self.pivots.len();
        if k > 0 {
            let f = DMatrixView::from_slice(&self.cols, n, k);
            let f_u = f.select_rows(block);
            g.gemm(-1.0, &f, &f_u.transpose(), 1.0);
        }
        let block_trace: f64 = block.iter().enumerate().map(|(j, &s)| g[(s, j)]).sum();
        let thresh = self.floor.max(f64::EPSILON * block_trace.max(0.0) * u as f64);

        let first_new = self.pivots.len();
        let mut accepted = 0;
        let mut col = vec![0.0; n];
        for (j, &s) in block.iter().enumerate() {
            col.copy_from_slice(g.column(j).as_slice());
            for c in first_new..self.pivots.len() {
                let prev = &self.cols[c * n..(c + 1) * n];
                let coef = prev[s];
                for (o, &f) in col.iter_mut().zip(prev) {
                    *o -= coef * f;
                }
            }
            let p = col[s];
            if p > thresh {
                self.append_column(s, &col, p.sqrt());
                accepted += 1;
            } else {
                self.reject(s);
            }
        }
        Ok(accepted)
    }

    pub fn finish(self) -> (NystromFactor, PivotTrace) {
        let k = self.pivots.len();
        let f = DMatrix::from_vec(self.n, k, self.cols);
        let trace = PivotTrace {
            initial_trace: self.initial_trace,
            residual_trace_history: self.history,
            entry_evals: self.oracle.evals() - self.evals_start,
            accepted: k,
            requested: self.requested.max(k),
            rejected_pivots: self.rejected,
        };
        (NystromFactor { f, pivots: self.pivots }, trace)
    }
}

/// Factorizes a fixed pivot sequence in order; pivots that are numerically
/// dependent on earlier ones are skipped.
pub fn factorize_pivots(
    oracle: &EntryOracle,
    pivots: &[usize],
) -> Result<(NystromFactor, PivotTrace)> {
    for &p in pivots {
        if p >= oracle.dim() {
            return Err(crate::Error::IndexOutOfRange { index: p, dim: oracle.dim() });
        }
    }
    let mut b = CholeskyBuilder::new(oracle, pivots.len());
    b.note_requested(pivots.len());
    for &s in pivots {
        b.try_pivot(s)?;
    }
    Ok(b.finish())
}
