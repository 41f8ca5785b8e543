//! Kernel ridge regression restricted to pivot points.
//!
//! With pivots S the coefficients solve
//! `(A(S,:) A(:,S) + lambda N A(S,S)) beta = A(S,:) y`
//! and predictions are `f(x) = sum_i beta_i K(x_{s_i}, x)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::factor::PivotTrace;
use crate::linalg::solve_spd_vec;
use crate::oracle::{Dataset, EntryOracle, KernelSpec};
use crate::strategy::PivotStrategy;

#[derive(Debug, Clone, PartialEq)]
pub struct KrrModel {
    pub kernel: KernelSpec,
    pub lambda: f64,
    /// Indices of the pivots in the training set.
    pub pivots: Vec<usize>,
    /// The pivot points themselves, in pivot order.
    pub pivot_points: Dataset,
    pub coefficients: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct KrrFit {
    pub model: KrrModel,
    pub trace: PivotTrace,
    /// All entry evaluations: pivot selection plus forming the restricted system.
    pub entry_evals: u64,
    /// Whether the restricted system needed the diagonal shift to factor.
    pub regularized: bool,
}

impl KrrModel {
    /// Evaluates the restricted prediction function at each query point.
    /// O(k) kernel evaluations per query.
    pub fn predict(&self, queries: &Dataset) -> Result<DVector<f64>> {
        if queries.dim() != self.pivot_points.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.pivot_points.dim(),
                found: queries.dim(),
            });
        }
        Ok(DVector::from_iterator(
            queries.len(),
            queries.points().map(|q| {
                self.pivot_points
                    .points()
                    .zip(self.coefficients.iter())
                    .map(|(x, &b)| b * self.kernel.eval(x, q))
                    .sum()
            }),
        ))
    }
}

/// Selects pivots with `strategy` and fits the restricted KRR problem.
pub fn krr_fit<R: Rng + ?Sized>(
    train: Arc<Dataset>,
    y: &DVector<f64>,
    kernel: KernelSpec,
    k: usize,
    lambda: f64,
    strategy: PivotStrategy,
    rng: &mut R,
) -> Result<KrrFit> {
    let n = train.len();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if !(lambda > 0.0) {
        return Err(invalid(format!("ridge parameter must be positive, got {lambda}")));
    }
    if k == 0 || k > n {
        return Err(invalid(format!("rank must lie in 1..={n}, got {k}")));
    }
    let oracle = EntryOracle::kernel(kernel, train.clone());
    let (factor, trace) = strategy.run(&oracle, k, rng)?;
    let pivots = factor.pivots().to_vec();
    let (coefficients, regularized) = solve_restricted_system(&oracle, y, &pivots, lambda)?;
    let model = KrrModel {
        kernel,
        lambda,
        pivot_points: train.select(&pivots)?,
        pivots,
        coefficients,
    };
    Ok(KrrFit { model, trace, entry_evals: oracle.evals(), regularized })
}

/// Solves the restricted normal equations for pivot set `pivots`; costs
/// `N |S|` entry evaluations. If the k x k system does not factor, retries
/// with `10 eps tr(A(S,S))` added to its diagonal and reports that it did.
pub fn solve_restricted_system(
    oracle: &EntryOracle,
    y: &DVector<f64>,
    pivots: &[usize],
    lambda: f64,
) -> Result<(DVector<f64>, bool)> {
    let n = oracle.dim();
    if pivots.is_empty() {
        return Ok((DVector::zeros(0), false));
    }
    let c = oracle.columns(pivots)?;
    let w = c.select_rows(pivots);
    let system = restricted_matrix(&c, &w, lambda, n);
    let rhs = c.transpose() * y;
    match solve_spd_vec(&system, &rhs) {
        Ok(beta) => Ok((beta, false)),
        Err(Error::Indefinite { .. }) => {
            let shift = 10.0 * f64::EPSILON * w.trace();
            let k = pivots.len();
            let shifted = system + DMatrix::identity(k, k) * shift;
            Ok((solve_spd_vec(&shifted, &rhs)?, true))
        }
        Err(e) => Err(e),
    }
}

pub(crate) fn restricted_matrix(c: &DMatrix<f64>, w: &DMatrix<f64>, lambda: f64, n: usize) -> DMatrix<f64> {
    let m = c.transpose() * c + w * (lambda * n as f64);
    (&m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use nalgebra::dvector;

    fn spread_points(n: usize) -> Arc<Dataset> {
        // 100 apart: Gaussian kernel with bandwidth 1 is the identity to machine precision
        Arc::new(Dataset::from_flat((0..n).map(|i| 100.0 * i as f64).collect(), 1).unwrap())
    }

    #[test]
    fn identity_kernel_shrinks_targets() {
        let n = 5;
        let y = dvector![1.0, -2.0, 3.0, 0.5, 4.0];
        let lambda = 0.1;
        let fit = krr_fit(
            spread_points(n),
            &y,
            KernelSpec::gaussian(1.0).unwrap(),
            n,
            lambda,
            PivotStrategy::Greedy,
            &mut seeded(0),
        )
        .unwrap();
        // greedy on the identity picks pivots in index order
        assert_eq!(fit.model.pivots, vec![0, 1, 2, 3, 4]);
        let want = &y / (1.0 + lambda * n as f64);
        assert!((fit.model.coefficients.clone() - want).amax() < 1e-14);
    }

    #[test]
    fn single_pivot_closed_form() {
        let train = Arc::new(Dataset::from_flat(vec![0.0, 0.4, 1.1, 2.0], 1).unwrap());
        let kernel = KernelSpec::gaussian(0.8).unwrap();
        let y = dvector![1.0, 0.5, -0.25, 2.0];
        let lambda = 0.05;
        let fit = krr_fit(train.clone(), &y, kernel, 1, lambda, PivotStrategy::Greedy, &mut seeded(0))
            .unwrap();
        let s = fit.model.pivots[0];
        let col: Vec<f64> = train.points().map(|x| kernel.eval(x, train.point(s))).collect();
        let num: f64 = col.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let den: f64 = col.iter().map(|a| a * a).sum::<f64>() + lambda * 4.0;
        assert!((fit.model.coefficients[0] - num / den).abs() < 1e-14);
    }

    #[test]
    fn prediction_examples() {
        let pts = Dataset::from_flat(vec![0.0, 1.0, 0.5, -1.0], 2).unwrap();
        let mut model = KrrModel {
            kernel: KernelSpec::laplace_l1(2.0).unwrap(),
            lambda: 1.0,
            pivots: vec![0, 1],
            pivot_points: pts.clone(),
            coefficients: DVector::zeros(2),
        };
        let q = Dataset::from_flat(vec![0.3, 0.3, 9.0, -2.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(model.predict(&q).unwrap(), DVector::zeros(3));

        model.coefficients = dvector![0.7, -1.3];
        let pred = model.predict(&q).unwrap();
        for (i, qp) in q.points().enumerate() {
            let want = 0.7 * model.kernel.eval(pts.point(0), qp) - 1.3 * model.kernel.eval(pts.point(1), qp);
            assert!((pred[i] - want).abs() < 1e-12);
        }

        let single = KrrModel {
            kernel: KernelSpec::gaussian(1.0).unwrap(),
            lambda: 1.0,
            pivots: vec![3],
            pivot_points: Dataset::from_flat(vec![0.2, 0.1], 2).unwrap(),
            coefficients: dvector![1.0],
        };
        let at_pivot = Dataset::from_flat(vec![0.2, 0.1], 2).unwrap();
        assert_eq!(single.predict(&at_pivot).unwrap()[0], 1.0);
        let wrong = Dataset::from_flat(vec![0.2], 1).unwrap();
        assert!(single.predict(&wrong).is_err());
    }

    #[test]
    fn full_pivots_interpolate() {
        let (train, y) = crate::generators::gen_regression(60, 2, 4).unwrap();
        let train = Arc::new(train);
        let fit = krr_fit(
            train.clone(),
            &y,
            KernelSpec::laplace_l1(0.5).unwrap(),
            60,
            1e-12,
            PivotStrategy::Greedy,
            &mut seeded(1),
        )
        .unwrap();
        assert_eq!(fit.model.pivots.len(), 60);
        let pred = fit.model.predict(&train).unwrap();
        assert!((pred - &y).amax() < 1e-6);
    }

    #[test]
    fn entry_evals_include_restricted_system() {
        let (train, y) = crate::generators::gen_regression(100, 3, 2).unwrap();
        let fit = krr_fit(
            Arc::new(train),
            &y,
            KernelSpec::gaussian(2.0).unwrap(),
            10,
            1e-3,
            PivotStrategy::RpCholesky,
            &mut seeded(5),
        )
        .unwrap();
        assert_eq!(fit.trace.entry_evals, 11 * 100);
        assert_eq!(fit.entry_evals, 11 * 100 + 10 * 100);
    }

    #[test]
    fn bad_parameters() {
        let train = spread_points(3);
        let k = KernelSpec::gaussian(1.0).unwrap();
        let y = dvector![1.0, 2.0, 3.0];
        let s = PivotStrategy::RpCholesky;
        assert!(krr_fit(train.clone(), &y, k, 2, 0.0, s, &mut seeded(0)).is_err());
        assert!(krr_fit(train.clone(), &y, k, 4, 1.0, s, &mut seeded(0)).is_err());
        assert!(krr_fit(train, &dvector![1.0], k, 1, 1.0, s, &mut seeded(0)).is_err());
    }
}
