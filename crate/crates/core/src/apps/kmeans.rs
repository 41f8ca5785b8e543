use nalgebra::{DMatrix, RowDVector};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::rng::sample_proportional;

/// Iteration cap for Lloyd's algorithm.
pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone)]
pub struct KMeans {
    pub labels: Vec<usize>,
    /// c x m, one centroid per row.
    pub centroids: DMatrix<f64>,
    /// Sum of squared distances after each assignment step; non-increasing.
    pub objective_history: Vec<f64>,
}

impl KMeans {
    pub fn objective(&self) -> f64 {
        self.objective_history.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Lloyd's algorithm from k-means++ seeding on the rows of `points`. With
/// `restarts > 1` the run with the lowest final objective is kept.
pub fn kmeans<R: Rng + ?Sized>(
    points: &DMatrix<f64>,
    c: usize,
    restarts: usize,
    rng: &mut R,
) -> Result<KMeans> {
    let n = points.nrows();
    if c == 0 {
        return Err(invalid("need at least one cluster"));
    }
    if c > n {
        return Err(invalid(format!("{c} clusters requested for {n} points")));
    }
    let mut best: Option<KMeans> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(points, seed_plus_plus(points, c, rng));
        if best.as_ref().is_none_or(|b| run.objective() < b.objective()) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn sq_dist(a: &[f64], b: impl Iterator<Item = f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn rows(points: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..points.nrows()).map(|i| points.row(i).iter().copied().collect()).collect()
}

fn seed_plus_plus<R: Rng + ?Sized>(points: &DMatrix<f64>, c: usize, rng: &mut R) -> DMatrix<f64> {
    let n = points.nrows();
    let pts = rows(points);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = pts.iter().map(|p| sq_dist(p, pts[chosen[0]].iter().copied())).collect();
    while chosen.len() < c {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            sample_proportional(rng, &dist, total)
        } else {
            // fewer distinct points than clusters: any unchosen index will do
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        for (d, p) in dist.iter_mut().zip(&pts) {
            *d = d.min(sq_dist(p, pts[next].iter().copied()));
        }
    }
    DMatrix::from_fn(c, points.ncols(), |a, j| points[(chosen[a], j)])
}

fn assign(pts: &[Vec<f64>], centroids: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let assigned: Vec<(usize, f64)> = pts
        .par_iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for a in 0..centroids.nrows() {
                let d = sq_dist(p, centroids.row(a).iter().copied());
                if d < best.1 {
                    best = (a, d);
                }
            }
            best
        })
        .collect();
    // sequential sum keeps the objective independent of thread scheduling
    let objective = assigned.iter().map(|&(_, d)| d).sum();
    (assigned.into_iter().map(|(a, _)| a).collect(), objective)
}

fn lloyd(points: &DMatrix<f64>, mut centroids: DMatrix<f64>) -> KMeans {
    let pts = rows(points);
    let (c, m) = centroids.shape();
    let (mut labels, objective) = assign(&pts, &centroids);
    let mut history = vec![objective];
    for _ in 0..MAX_ITERATIONS {
        let previous = centroids.clone();
        let mut sums = DMatrix::<f64>::zeros(c, m);
        let mut counts = vec![0usize; c];
        for (p, &l) in pts.iter().zip(&labels) {
            counts[l] += 1;
            for (j, &x) in p.iter().enumerate() {
                sums[(l, j)] += x;
            }
        }
        for a in 0..c {
            // an empty cluster keeps its previous centroid
            if counts[a] > 0 {
                let mean: RowDVector<f64> = sums.row(a) / counts[a] as f64;
                centroids.set_row(a, &mean);
            }
        }
        let (next, objective) = assign(&pts, &centroids);
        // in exact arithmetic the update never increases the objective; when
        // rounding in the means does, the previous state is already converged
        if objective > history[history.len() - 1] {
            centroids = previous;
            break;
        }
        history.push(objective);
        if next == labels {
            break;
        }
        labels = next;
    }
    KMeans { labels, centroids, objective_history: history }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn column(xs: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(xs.len(), 1, xs)
    }

    #[test]
    fn repeated_locations_are_recovered() {
        let locs = [[0.0, 0.0], [5.0, 1.0], [-3.0, 4.0]];
        let pts = DMatrix::from_fn(30, 2, |i, j| locs[i % 3][j]);
        for seed in 0..5 {
            let km = kmeans(&pts, 3, 1, &mut seeded(seed)).unwrap();
            assert_eq!(km.objective(), 0.0);
            for i in 0..30 {
                assert_eq!(km.labels[i], km.labels[i % 3]);
            }
        }
    }

    #[test]
    fn one_cluster_per_point() {
        let pts = column(&[0.0, 1.0, 2.5, 7.0]);
        let km = kmeans(&pts, 4, 1, &mut seeded(1)).unwrap();
        assert_eq!(km.objective(), 0.0);
        let mut l = km.labels.clone();
        l.sort_unstable();
        assert_eq!(l, vec![0, 1, 2, 3]);
    }

    #[test]
    fn two_pairs_on_a_line() {
        // the only zero-spread partition is {0,0} | {10,10}
        let pts = column(&[0.0, 0.0, 10.0, 10.0]);
        let km = kmeans(&pts, 2, 1, &mut seeded(2)).unwrap();
        let mut cents: Vec<f64> = km.centroids.iter().copied().collect();
        cents.sort_by(f64::total_cmp);
        assert_eq!(cents, vec![0.0, 10.0]);
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = seeded(3);
        let pts = DMatrix::from_fn(300, 3, |_, _| rng.random::<f64>());
        for seed in 0..10 {
            let km = kmeans(&pts, 6, 1, &mut seeded(seed)).unwrap();
            for w in km.objective_history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{w:?}");
            }
        }
    }

    #[test]
    fn too_many_clusters() {
        assert!(kmeans(&column(&[1.0, 2.0]), 3, 1, &mut seeded(0)).is_err());
        assert!(kmeans(&column(&[1.0, 2.0]), 0, 1, &mut seeded(0)).is_err());
    }
}
