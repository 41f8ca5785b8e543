//! Synthetic datasets and structured test matrices.
//!
//! Every random generator is a pure function of its seed.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::oracle::Dataset;
use crate::rng::seeded;

/// Geometry of the smile dataset. The face is a unit circle, the mouth a lower
/// arc, the eyes two tight Gaussian clusters.
pub mod smile {
    pub const FACE_RADIUS: f64 = 1.0;
    pub const MOUTH_RADIUS: f64 = 0.6;
    /// Mouth spans angles (in degrees) from 200 to 340.
    pub const MOUTH_ARC_DEG: (f64, f64) = (200.0, 340.0);
    pub const EYE_CENTERS: [(f64, f64); 2] = [(-0.35, 0.35), (0.35, 0.35)];
    pub const EYE_SPREAD: f64 = 0.01;
    /// Radial jitter on the face and mouth curves.
    pub const CURVE_JITTER: f64 = 0.01;
    /// Fraction of non-eye points placed on the face outline.
    pub const FACE_SHARE: f64 = 0.6;
    /// Gaussian kernel bandwidth used for smile experiments.
    pub const BANDWIDTH: f64 = 0.25;

    /// Eye points for a dataset of `n` points: 100 per 10^4, at least 10.
    pub fn eye_count(n: usize) -> usize {
        (100 * n / 10_000).max(10)
    }
}

/// Default Gaussian kernel bandwidth for the outlier cloud in R^20.
pub const OUTLIERS_BANDWIDTH: f64 = 10.0;

/// A 2-D smile: face outline, mouth arc, and two small eyes.
pub fn gen_smile(n: usize, seed: u64) -> Result<Dataset> {
    if n < 200 {
        return Err(invalid(format!("smile needs at least 200 points, got {n}")));
    }
    let mut rng = seeded(seed);
    let eyes = smile::eye_count(n);
    let rest = n - eyes;
    let face = (rest as f64 * smile::FACE_SHARE).round() as usize;
    let mouth = rest - face;
    let mut data = Vec::with_capacity(2 * n);

    let mut arc = |count: usize, radius: f64, from: f64, to: f64, data: &mut Vec<f64>| {
        for _ in 0..count {
            let t = rng.random_range(from..to);
            let r = radius + smile::CURVE_JITTER * rng.sample::<f64, _>(StandardNormal);
            data.extend_from_slice(&[r * t.cos(), r * t.sin()]);
        }
    };
    arc(face, smile::FACE_RADIUS, 0.0, 2.0 * PI, &mut data);
    let (a0, a1) = smile::MOUTH_ARC_DEG;
    arc(mouth, smile::MOUTH_RADIUS, a0.to_radians(), a1.to_radians(), &mut data);
    for e in 0..eyes {
        let (cx, cy) = smile::EYE_CENTERS[e % 2];
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        data.extend_from_slice(&[cx + smile::EYE_SPREAD * dx, cy + smile::EYE_SPREAD * dy]);
    }
    Dataset::from_flat(data, 2)
}

/// Standard normal cloud in R^d with `n_out` points scaled by `scale`,
/// placed at random positions. Returns the dataset and the outlier indices.
pub fn gen_outliers(
    n: usize,
    d: usize,
    n_out: usize,
    scale: f64,
    seed: u64,
) -> Result<(Dataset, Vec<usize>)> {
    if n == 0 || d == 0 {
        return Err(invalid("outlier cloud needs n >= 1 and d >= 1"));
    }
    if n_out > n {
        return Err(invalid(format!("{n_out} outliers exceed {n} points")));
    }
    let mut rng = seeded(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut is_outlier = vec![false; n];
    for &i in &order[..n_out] {
        is_outlier[i] = true;
    }
    let mut data = Vec::with_capacity(n * d);
    for &out in &is_outlier {
        let s = if out { scale } else { 1.0 };
        data.extend((0..d).map(|_| s * rng.sample::<f64, _>(StandardNormal)));
    }
    let outliers = (0..n).filter(|&i| is_outlier[i]).collect();
    Ok((Dataset::from_flat(data, d)?, outliers))
}

/// `c` isotropic Gaussian blobs in R^d with centers on a scaled simplex-like
/// layout `separation * e_j` (wrapping coordinates when c > d). Returns the
/// points and the generating cluster of each point.
pub fn gen_blobs(
    n: usize,
    d: usize,
    c: usize,
    separation: f64,
    spread: f64,
    seed: u64,
) -> Result<(Dataset, Vec<usize>)> {
    if n == 0 || d == 0 || c == 0 || c > n {
        return Err(invalid("blobs need n >= c >= 1 and d >= 1"));
    }
    let mut rng = seeded(seed);
    let centers: Vec<Vec<f64>> = (0..c)
        .map(|j| {
            let mut v = vec![0.0; d];
            // alternate signs so more than d centers stay apart
            let sign = if (j / d) % 2 == 0 { 1.0 } else { -1.0 };
            v[j % d] = sign * separation * (1 + j / (2 * d)) as f64;
            v
        })
        .collect();
    let mut labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    labels.shuffle(&mut rng);
    let mut data = Vec::with_capacity(n * d);
    for &l in &labels {
        data.extend(centers[l].iter().map(|&m| m + spread * rng.sample::<f64, _>(StandardNormal)));
    }
    Ok((Dataset::from_flat(data, d)?, labels))
}

/// Noiseless regression target on a standard normal design in R^d:
/// `y = sin(x_1) + cos(x_2 / 2) + x_3^2 / 4 + ...` (terms cycle over coordinates).
pub fn gen_regression(n: usize, d: usize, seed: u64) -> Result<(Dataset, DVector<f64>)> {
    if n == 0 || d == 0 {
        return Err(invalid("regression data needs n >= 1 and d >= 1"));
    }
    let mut rng = seeded(seed);
    let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    let ds = Dataset::from_flat(data, d)?;
    let y = DVector::from_iterator(n, ds.points().map(regression_target));
    Ok((ds, y))
}

pub fn regression_target(x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(j, &v)| match j % 3 {
            0 => v.sin(),
            1 => (0.5 * v).cos(),
            _ => 0.25 * v * v,
        })
        .sum()
}

/// The greedy worst case `blkdiag((1 + delta) I_{N-M}, ones(M, M))`.
#[derive(Debug, Clone)]
pub struct GreedyWorstCase {
    pub matrix: DMatrix<f64>,
    /// Size of the all-ones block: the smallest integer above `(1 - eta) N`.
    pub m: usize,
    pub delta: f64,
    /// `(1 - (1 + eps) eta) N - 1`, the largest k covered by the greedy lower bound.
    pub k_max: f64,
}

pub fn gen_greedy_worstcase(n: usize, eta: f64, eps: f64) -> Result<GreedyWorstCase> {
    if !(eta > 0.0 && eta < 1.0) || !(eps > 0.0) {
        return Err(invalid(format!("need 0 < eta < 1 and eps > 0, got eta={eta}, eps={eps}")));
    }
    let m = ((1.0 - eta) * n as f64).floor() as usize + 1;
    if m >= n {
        return Err(invalid(format!("all-ones block of size {m} fills the {n}x{n} matrix")));
    }
    let delta = (m as f64 - (1.0 - eta) * n as f64) / ((1.0 - eta) * (n - m) as f64);
    if !(delta > 0.0) {
        return Err(invalid(format!("construction needs delta > 0, got {delta}")));
    }
    let head = n - m;
    let matrix = DMatrix::from_fn(n, n, |i, j| match (i < head, j < head) {
        (true, true) if i == j => 1.0 + delta,
        (false, false) => 1.0,
        _ => 0.0,
    });
    let k_max = (1.0 - (1.0 + eps) * eta) * n as f64 - 1.0;
    Ok(GreedyWorstCase { matrix, m, delta, k_max })
}

/// The uniform-sampling worst case: an all-ones block of size `N - M(r-1)`
/// followed by `r - 1` copies of `C_{M,delta}` (1 on the diagonal, `delta` off it).
pub fn gen_uniform_worstcase(n: usize, m: usize, r: usize, delta: f64) -> Result<DMatrix<f64>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    if r < 2 || m == 0 {
        return Err(invalid("need r >= 2 and M >= 1"));
    }
    let tail = m * (r - 1);
    if tail >= n {
        return Err(invalid(format!("{} blocks of size {m} do not fit in N = {n}", r - 1)));
    }
    let head = n - tail;
    let block_of = |i: usize| if i < head { 0 } else { 1 + (i - head) / m };
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let (bi, bj) = (block_of(i), block_of(j));
        if bi != bj {
            0.0
        } else if bi == 0 || i == j {
            1.0
        } else {
            delta
        }
    }))
}

/// Haar-ish random orthogonal matrix from the QR factorization of a Gaussian
/// matrix, with column signs fixed by the diagonal of R.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `Q diag(1^-p, 2^-p, ..., N^-p) Q^T` with a random orthogonal Q.
pub fn powerlaw_psd(n: usize, exponent: f64, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 || n > 2000 {
        return Err(invalid(format!("power-law fixture needs 1 <= N <= 2000, got {n}")));
    }
    let spectrum = DVector::from_fn(n, |i, _| ((i + 1) as f64).powf(-exponent));
    Ok(conjugate_spectrum(&spectrum, seed))
}

pub fn conjugate_spectrum(spectrum: &DVector<f64>, seed: u64) -> DMatrix<f64> {
    let mut rng = seeded(seed);
    let q = random_orthogonal(spectrum.len(), &mut rng);
    let scaled = DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] * spectrum[j]);
    symmetrize(scaled * q.transpose())
}

/// `G G^T` for an `n x rank` standard normal G: psd with rank `min(n, rank)`.
pub fn random_psd(n: usize, rank: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seeded(seed);
    let g = DMatrix::from_fn(n, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
    symmetrize(&g * g.transpose())
}

pub fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}
