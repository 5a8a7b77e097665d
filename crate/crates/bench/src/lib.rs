//! Fixtures shared by the benchmarks.

use hoss_core::toydata::gen_toy;
use hoss_core::{BlockShape, Dataset, LatentSample, ModelParams, ToyConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn toy_fixture(n: usize) -> Dataset {
    gen_toy(&ToyConfig {
        n_samples: n,
        ..ToyConfig::default()
    })
    .expect("toy data")
}

/// A model of `shape` with random filters and a random latent state.
pub fn random_fixture(shape: BlockShape, seed: u64) -> (ModelParams, Vec<f64>, LatentSample) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = hoss_core::verify::random_tiny_model(shape, 1.0, &mut rng);
    let v: Vec<f64> = (0..shape.d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut x = LatentSample::zeros(&shape);
    x.spikes.f.iter_mut().for_each(|b| *b = rng.random_bool(0.5));
    x.spikes.g.iter_mut().for_each(|b| *b = rng.random_bool(0.5));
    x.spikes.h.iter_mut().for_each(|b| *b = rng.random_bool(0.5));
    x.s.iter_mut().for_each(|s| *s = rng.random_range(-1.0..1.0));
    (p, v, x)
}
