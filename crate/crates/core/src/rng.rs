//! Seeded random streams.
//!
//! Every randomized routine takes a `&mut impl Rng`. Experiments derive one
//! ChaCha8 stream per trial from `(seed, trial)` using the generator's native
//! stream counter, so trials are independent of execution order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// Stream reserved for dataset and fixture generation inside experiments.
pub const FIXTURE_STREAM: u64 = u64::MAX;

/// Returns the generator for `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Shorthand for stream 0.
pub fn seeded(seed: u64) -> StreamRng {
    stream_rng(seed, 0)
}

/// Draws an index with probability `weights[j] / total` by inverse CDF over a
/// linear scan. Non-positive weights are never returned. `total` must be the
/// sum of the positive weights and strictly positive.
pub fn sample_proportional<R: Rng + ?Sized>(rng: &mut R, weights: &[f64], total: f64) -> usize {
    debug_assert!(total > 0.0);
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (j, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last_positive = Some(j);
        if acc > target {
            return j;
        }
    }
    // target landed in the rounding gap between acc and total
    last_positive.expect("sample_proportional called with no positive weight")
}
