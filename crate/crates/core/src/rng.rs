//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream addressed by
//! `(seed, stream)`. ChaCha is counter based, so a task that owns its own
//! stream index reproduces the same numbers whether it runs serially or on a
//! worker thread.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian_vector(rng: &mut StreamRng, dim: usize) -> Array1<f64> {
    Array1::from_shape_fn(dim, |_| rng.sample(StandardNormal))
}

pub fn uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
