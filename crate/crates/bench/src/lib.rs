//! Fixtures shared by the benchmarks.

use probcast_core::harness::random_stream;
use probcast_core::{Example, Forecaster};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A seeded stream of `t` examples with `n`-dimensional signals and `d` classes.
pub fn stream(seed: u64, t: usize, n: usize, d: usize) -> Vec<Example> {
    random_stream(&mut ChaCha8Rng::seed_from_u64(seed), t, n, d, 1.0)
}

/// Feeds every example to `f` without predicting.
pub fn warm<F: Forecaster + ?Sized>(f: &mut F, data: &[Example]) {
    for e in data {
        f.update(&e.x, &e.y).expect("valid example");
    }
}
