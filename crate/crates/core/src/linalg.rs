//! Dense symmetric linear algebra shared by the factorizations, the
//! applications and the diagnostics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::factor::NystromFactor;

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    /// Column `i` is the eigenvector for `eigenvalues[i]`.
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    /// The best rank-`r` approximation from the truncated decomposition.
    pub fn truncated(&self, r: usize) -> DMatrix<f64> {
        let r = r.min(self.eigenvalues.len());
        let v = self.eigenvectors.columns(0, r);
        let scaled = DMatrix::from_fn(v.nrows(), r, |i, j| v[(i, j)] * self.eigenvalues[j]);
        scaled * v.transpose()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Fails when `max |a_ij - a_ji| > rel_tol * max |a_ij|`.
pub fn check_symmetric(a: &DMatrix<f64>, rel_tol: f64) -> Result<()> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::NotSquare { rows: n, cols: a.ncols() });
    }
    let scale = a.amax();
    let mut worst = (0, 0, 0.0);
    for j in 0..n {
        for i in (j + 1)..n {
            let gap = (a[(i, j)] - a[(j, i)]).abs();
            if gap > worst.2 {
                worst = (i, j, gap);
            }
        }
    }
    if worst.2 > rel_tol * scale {
        return Err(Error::NotSymmetric { i: worst.0, j: worst.1, gap: worst.2 });
    }
    Ok(())
}

pub fn sym_eig(a: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    check_symmetric(a, 1e-12)?;
    Ok(sym_eig_unchecked(a))
}

pub(crate) fn sym_eig_unchecked(a: &DMatrix<f64>) -> SpectralDecomposition {
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let eigenvalues = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let eigenvectors = DMatrix::from_fn(a.nrows(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    SpectralDecomposition { eigenvalues, eigenvectors }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.min()
}

/// tr(A - [[A]]_r): the sum of all but the `r` largest eigenvalues.
/// Returns `tr A` exactly at `r = 0`.
pub fn best_rank_r_error(a: &DMatrix<f64>, r: usize) -> Result<f64> {
    if r == 0 {
        check_symmetric(a, 1e-12)?;
        return Ok(a.trace());
    }
    Ok(tail_sum(&sym_eig(a)?.eigenvalues, r))
}

/// Sum of `values[r..]` for descending eigenvalues, with roundoff-negative
/// eigenvalues counted as zero so the result is monotone in `r`.
pub fn tail_sum(values: &DVector<f64>, r: usize) -> f64 {
    values.iter().skip(r).map(|&l| l.max(0.0)).sum()
}

/// (tr A - ||F||_F^2) / tr A, clamped below at zero.
pub fn relative_trace_error(a: &DMatrix<f64>, factor: &NystromFactor) -> f64 {
    relative_trace_error_from_trace(a.trace(), factor)
}

pub fn relative_trace_error_from_trace(trace: f64, factor: &NystromFactor) -> f64 {
    if trace <= 0.0 {
        return 0.0;
    }
    ((trace - factor.frobenius_norm_squared()) / trace).max(0.0)
}

/// Phi(A) = A - A^2 / tr A, the expected residual after one random pivot.
pub fn expected_residual_map(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let tr = a.trace();
    if tr <= 0.0 {
        return Err(Error::ZeroTrace);
    }
    Ok(a - (a * a) / tr)
}

/// Solves `M x = b` for symmetric positive definite `M` by Cholesky.
pub fn solve_spd(m: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::NotSquare { rows: n, cols: m.ncols() });
    }
    if b.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.nrows() });
    }
    let chol = cholesky(m)?;
    Ok(chol.solve(b))
}

pub fn solve_spd_vec(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let x = solve_spd(m, &DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
    Ok(x.column(0).into_owned())
}

fn cholesky(m: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    nalgebra::Cholesky::new(m.clone()).ok_or_else(|| {
        // locate the failing pivot for the diagnostic
        let step = first_bad_pivot(m).unwrap_or(0);
        Error::Indefinite { step }
    })
}

fn first_bad_pivot(m: &DMatrix<f64>) -> Option<usize> {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Some(j);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    None
}

/// Moore-Penrose pseudoinverse of a symmetric matrix, dropping eigenvalues
/// with magnitude below `max(k, n) * eps * sigma_max`.
pub fn pinv_symmetric(w: &DMatrix<f64>, n_ambient: usize) -> DMatrix<f64> {
    let k = w.nrows();
    if k == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(w.clone());
    let sigma_max = eig.eigenvalues.amax();
    let cutoff = (k.max(n_ambient) as f64) * f64::EPSILON * sigma_max;
    let mut out = DMatrix::zeros(k, k);
    for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam.abs() <= cutoff {
            continue;
        }
        let v = eig.eigenvectors.column(idx);
        out += (v * v.transpose()) / lam;
    }
    out
}

pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let denom = b.norm();
    let diff = (a - b).norm();
    if denom == 0.0 {
        diff
    } else {
        diff / denom
    }
}
