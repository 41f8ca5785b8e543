//! Spectral clustering from a Nyström factor `F`, using the row sums of
//! `F F^T` in place of the degree matrix.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::kmeans::kmeans;
use crate::error::{invalid, Result};
use crate::factor::{NystromFactor, PivotTrace};
use crate::oracle::{Dataset, EntryOracle, KernelSpec};
use crate::strategy::PivotStrategy;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParams {
    /// Approximation rank.
    pub k: usize,
    /// Eigenvectors kept in the embedding.
    pub m: usize,
    /// Number of clusters.
    pub c: usize,
    /// k-means restarts.
    pub restarts: usize,
}

#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub kernel: KernelSpec,
    pub pivots: Vec<usize>,
    /// N x m; row i represents point i.
    pub embedding: DMatrix<f64>,
    pub labels: Vec<usize>,
    /// c x m.
    pub centroids: DMatrix<f64>,
    pub kmeans_objective: Vec<f64>,
    pub trace: PivotTrace,
}

impl ClusterModel {
    pub fn m(&self) -> usize {
        self.embedding.ncols()
    }
}

/// Approximate degrees `F (F^T 1)`, floored at `1e-12 * max`.
pub fn approximate_degrees(factor: &NystromFactor) -> DVector<f64> {
    let f = factor.factor();
    let col_sums = f.row_sum().transpose();
    let mut deg = f * col_sums;
    let floor = 1e-12 * deg.max().max(0.0);
    deg.apply(|x| *x = x.max(floor));
    deg
}

/// Left singular vectors of `D^-1/2 F` (descending singular values), scaled
/// back by `D^-1/2`; returns the first `m` columns and the full orthonormal U.
pub fn spectral_embedding(factor: &NystromFactor, m: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let r = factor.rank();
    if m == 0 || m > r {
        return Err(invalid(format!("need 1 <= m <= rank = {r}, got m = {m}")));
    }
    let inv_sqrt = approximate_degrees(factor).map(|d| 1.0 / d.sqrt());
    let f = factor.factor();
    let g = DMatrix::from_fn(f.nrows(), f.ncols(), |i, j| inv_sqrt[i] * f[(i, j)]);
    let svd = g.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let embedding = DMatrix::from_fn(u.nrows(), m, |i, j| inv_sqrt[i] * u[(i, j)]);
    Ok((embedding, u))
}

pub fn spectral_cluster<R: Rng + ?Sized>(
    data: Arc<Dataset>,
    kernel: KernelSpec,
    params: SpectralParams,
    strategy: PivotStrategy,
    rng: &mut R,
) -> Result<ClusterModel> {
    let SpectralParams { k, m, c, restarts } = params;
    if c == 0 {
        return Err(invalid("need at least one cluster"));
    }
    if m > k {
        return Err(invalid(format!("m = {m} exceeds rank k = {k}")));
    }
    let oracle = EntryOracle::kernel(kernel, data);
    let (factor, trace) = strategy.run(&oracle, k, rng)?;
    let (embedding, _) = spectral_embedding(&factor, m)?;
    let km = kmeans(&embedding, c, restarts, rng)?;
    Ok(ClusterModel {
        kernel,
        pivots: factor.pivots().to_vec(),
        embedding,
        labels: km.labels,
        centroids: km.centroids,
        kmeans_objective: km.objective_history,
        trace,
    })
}
