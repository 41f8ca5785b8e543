//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use rpchol::generators::{gen_smile, powerlaw_psd};
use rpchol::{EntryOracle, KernelSpec};

pub const SEED: u64 = 0x5eed;

pub struct Fixture {
    pub name: &'static str,
    pub oracle: EntryOracle,
}

/// Gaussian kernel on smile points and an explicit power-law matrix, both of size `n`.
pub fn fixtures(n: usize) -> Vec<Fixture> {
    let smile = Arc::new(gen_smile(n, SEED).expect("smile fixture"));
    let kernel = KernelSpec::gaussian(0.25).expect("bandwidth");
    let powerlaw = powerlaw_psd(n, 2.0, SEED).expect("powerlaw fixture");
    vec![
        Fixture { name: "smile", oracle: EntryOracle::kernel(kernel, smile) },
        Fixture { name: "powerlaw", oracle: EntryOracle::explicit(powerlaw).expect("psd") },
    ]
}
