//! Entry-level access to psd matrices.
//!
//! An [`EntryOracle`] is either an explicit dense symmetric matrix or a kernel
//! matrix defined implicitly by a [`KernelSpec`] over a [`Dataset`]. Every
//! scalar entry it materializes is counted, so the cost of an algorithm can be
//! reported as an exact number of entry evaluations.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Points in R^d, stored row-major in a single buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl Dataset {
    pub fn from_flat(data: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || data.is_empty() {
            return Err(Error::EmptyInput);
        }
        if data.len() % d != 0 {
            return Err(invalid(format!(
                "{} values cannot be split into points of dimension {d}",
                data.len()
            )));
        }
        Ok(Self { n: data.len() / d, data, d })
    }

    pub fn from_rows<P: AsRef<[f64]>>(rows: &[P]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput)?;
        let d = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(data, d)
    }

    /// A dataset with no points. Only models fitted on an empty pivot set
    /// carry one; kernel oracles need at least one point.
    pub fn empty(d: usize) -> Self {
        Self { data: Vec::new(), n: 0, d }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Returns a new dataset with the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Ok(Self::empty(self.d));
        }
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(Error::IndexOutOfRange { index: i, dim: self.n });
            }
            data.extend_from_slice(self.point(i));
        }
        Self::from_flat(data, self.d)
    }

    /// Reads one point per row, numeric columns, no header.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let rows = read_numeric_rows(reader)?;
        Self::from_rows(&rows)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for p in self.points() {
            w.write_record(p.iter().map(|x| x.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Parses headerless numeric CSV into rows of equal length.
pub fn read_numeric_rows<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: not a number: {f:?}", line + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a dense matrix stored as headerless CSV, one row per line.
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let rows = read_numeric_rows(reader)?;
    let n = rows.len();
    let m = rows.first().map(Vec::len).ok_or(Error::EmptyInput)?;
    if let Some(bad) = rows.iter().find(|r| r.len() != m) {
        return Err(Error::DimensionMismatch { expected: m, found: bad.len() });
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn write_matrix_csv<W: Write>(a: &DMatrix<f64>, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for i in 0..a.nrows() {
        w.write_record(a.row(i).iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// exp(-|x - y|^2 / (2 sigma^2))
    Gaussian,
    /// exp(-|x - y|_1 / sigma)
    LaplaceL1,
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::LaplaceL1 => "laplace_l1",
        })
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "laplace_l1" | "laplace" => Ok(KernelFamily::LaplaceL1),
            other => Err(Error::Parse(format!("unknown kernel family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(invalid(format!("kernel bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self { family, bandwidth })
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, bandwidth)
    }

    pub fn laplace_l1(bandwidth: f64) -> Result<Self> {
        Self::new(KernelFamily::LaplaceL1, bandwidth)
    }

    /// Evaluates K(x, y). Symmetric bit-for-bit in its arguments.
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        match self.family {
            KernelFamily::Gaussian => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * self.bandwidth * self.bandwidth)).exp()
            }
            KernelFamily::LaplaceL1 => {
                let l1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
                (-l1 / self.bandwidth).exp()
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Explicit(Arc<DMatrix<f64>>),
    Kernel { spec: KernelSpec, data: Arc<Dataset> },
}

/// A psd matrix exposed entry by entry, with an evaluation tally.
///
/// The tally is atomic, so one oracle may be read from several threads. For
/// per-run accounting use [`EntryOracle::fresh`], which shares the underlying
/// data but starts a new tally.
#[derive(Debug)]
pub struct EntryOracle {
    source: Source,
    dim: usize,
    evals: AtomicU64,
}

impl EntryOracle {
    /// Wraps an explicit matrix. Symmetry is checked against `1e-12 * max|a_ij|`
    /// and the stored matrix is the exact symmetric part `(A + A^T) / 2`.
    pub fn explicit(a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::NotSquare { rows: n, cols: a.ncols() });
        }
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        crate::linalg::check_symmetric(&a, 1e-12)?;
        // float addition commutes, so this is exactly symmetric
        let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
        Ok(Self { source: Source::Explicit(Arc::new(sym)), dim: n, evals: AtomicU64::new(0) })
    }

    pub fn kernel(spec: KernelSpec, data: Arc<Dataset>) -> Self {
        let dim = data.len();
        Self { source: Source::Kernel { spec, data }, dim, evals: AtomicU64::new(0) }
    }

    /// Same matrix, new zeroed tally.
    pub fn fresh(&self) -> Self {
        Self { source: self.source.clone(), dim: self.dim, evals: AtomicU64::new(0) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn evals(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn reset_evals(&self) {
        self.evals.store(0, Ordering::Relaxed);
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.source, Source::Explicit(_))
    }

    /// The explicit matrix, if this oracle wraps one. Reading it is not counted.
    pub fn as_explicit(&self) -> Option<&DMatrix<f64>> {
        match &self.source {
            Source::Explicit(a) => Some(a),
            Source::Kernel { .. } => None,
        }
    }

    pub fn kernel_spec(&self) -> Option<(&KernelSpec, &Arc<Dataset>)> {
        match &self.source {
            Source::Kernel { spec, data } => Some((spec, data)),
            Source::Explicit(_) => None,
        }
    }

    #[inline]
    fn count(&self, n: usize) {
        self.evals.fetch_add(n as u64, Ordering::Relaxed);
    }

    fn check(&self, i: usize) -> Result<()> {
        if i >= self.dim {
            Err(Error::IndexOutOfRange { index: i, dim: self.dim })
        } else {
            Ok(())
        }
    }

    #[inline]
    fn raw(&self, i: usize, j: usize) -> f64 {
        match &self.source {
            Source::Explicit(a) => a[(i, j)],
            Source::Kernel { spec, data } => spec.eval(data.point(i), data.point(j)),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> Result<f64> {
        self.check(i)?;
        self.check(j)?;
        self.count(1);
        Ok(self.raw(i, j))
    }

    /// Writes column `j` into `out` (length N). Counts N evaluations.
    pub fn column_into(&self, j: usize, out: &mut [f64]) -> Result<()> {
        self.check(j)?;
        if out.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: out.len() });
        }
        match &self.source {
            Source::Explicit(a) => out.copy_from_slice(a.column(j).as_slice()),
            Source::Kernel { spec, data } => {
                let xj = data.point(j);
                for (o, xi) in out.iter_mut().zip(data.points()) {
                    *o = spec.eval(xi, xj);
                }
            }
        }
        self.count(self.dim);
        Ok(())
    }

    pub fn column(&self, j: usize) -> Result<DVector<f64>> {
        let mut v = DVector::zeros(self.dim);
        self.column_into(j, v.as_mut_slice())?;
        Ok(v)
    }

    pub fn diagonal(&self) -> DVector<f64> {
        self.count(self.dim);
        DVector::from_fn(self.dim, |i, _| self.raw(i, i))
    }

    /// The block A(rows, cols). Indices must be in range and distinct within
    /// each list.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<DMatrix<f64>> {
        self.validate_indices(rows)?;
        self.validate_indices(cols)?;
        self.count(rows.len() * cols.len());
        Ok(DMatrix::from_fn(rows.len(), cols.len(), |a, b| self.raw(rows[a], cols[b])))
    }

    /// The full columns A(:, cols), N x |cols|.
    pub fn columns(&self, cols: &[usize]) -> Result<DMatrix<f64>> {
        self.validate_indices(cols)?;
        let mut out = DMatrix::zeros(self.dim, cols.len());
        for (c, &j) in cols.iter().enumerate() {
            self.column_into(j, out.column_mut(c).as_mut_slice())?;
        }
        Ok(out)
    }

    /// Materializes the whole matrix (N^2 evaluations).
    pub fn to_dense(&self) -> DMatrix<f64> {
        self.count(self.dim * self.dim);
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.raw(i, j))
    }

    /// tr(A) without touching the tally. Used for reporting, not by algorithms.
    pub fn trace_uncounted(&self) -> f64 {
        (0..self.dim).map(|i| self.raw(i, i)).sum()
    }

    pub(crate) fn validate_indices(&self, idx: &[usize]) -> Result<()> {
        let mut seen = HashSet::with_capacity(idx.len());
        for &i in idx {
            self.check(i)?;
            if !seen.insert(i) {
                return Err(Error::DuplicateIndex(i));
            }
        }
        Ok(())
    }
}
