use itertools::Itertools;
use pathfinding::prelude::{kuhn_munkres, Matrix};

use crate::error::{invalid, Error, Result};

/// Symmetric mean absolute percentage error,
/// `mean |y - y'| / ((|y| + |y'|) / 2)`. A term where both values are below
/// 1e-300 in magnitude counts as zero.
pub fn smape(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.is_empty() {
        return Err(Error::EmptyInput);
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch { expected: y_true.len(), found: y_pred.len() });
    }
    let total: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(&y, &p)| {
            if y.abs() < 1e-300 && p.abs() < 1e-300 {
                0.0
            } else {
                (y - p).abs() / ((y.abs() + p.abs()) / 2.0)
            }
        })
        .sum();
    Ok(total / y_true.len() as f64)
}

/// Fraction of points misassigned under the best relabeling of `labels`
/// onto `reference`. Exhaustive over permutations for `c <= 8`, optimal
/// assignment otherwise.
pub fn clustering_error(labels: &[usize], reference: &[usize], c: usize) -> Result<f64> {
    if labels.len() != reference.len() {
        return Err(Error::DimensionMismatch { expected: reference.len(), found: labels.len() });
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(&bad) = labels.iter().chain(reference).find(|&&l| l >= c) {
        return Err(invalid(format!("label {bad} outside 0..{c}")));
    }
    // confusion[a][b] = points labeled a whose reference is b
    let mut confusion = vec![vec![0i64; c]; c];
    for (&a, &b) in labels.iter().zip(reference) {
        confusion[a][b] += 1;
    }
    let agreed = if c <= 8 {
        (0..c)
            .permutations(c)
            .map(|perm| (0..c).map(|a| confusion[a][perm[a]]).sum::<i64>())
            .max()
            .unwrap_or(0)
    } else {
        let weights = Matrix::from_rows(confusion).expect("square confusion matrix");
        kuhn_munkres(&weights).0
    };
    Ok(1.0 - agreed as f64 / labels.len() as f64)
}
