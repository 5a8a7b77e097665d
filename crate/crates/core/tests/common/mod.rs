#![allow(dead_code, clippy::needless_range_loop)]

use hoss_core::verify::random_tiny_model;
use hoss_core::{BlockShape, Covariance, LatentSample, ModelParams, SpikeConfig};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tiny(d: usize, k: usize, m: usize, n: usize, seed: u64) -> ModelParams {
    let shape = BlockShape::new(d, k, m, n).unwrap();
    random_tiny_model(shape, 1.0, &mut rng(seed))
}

pub fn random_v(p: &ModelParams, r: &mut impl Rng) -> Vec<f64> {
    (0..p.shape.d).map(|_| r.random_range(-1.5..1.5)).collect()
}

pub fn random_spikes(shape: &BlockShape, r: &mut impl Rng) -> SpikeConfig {
    let mut x = SpikeConfig::zeros(shape);
    x.f.iter_mut().chain(&mut x.g).chain(&mut x.h).for_each(|b| *b = r.random_bool(0.5));
    x
}

pub fn random_latent(shape: &BlockShape, r: &mut impl Rng) -> LatentSample {
    let mut x = LatentSample::zeros(shape);
    x.spikes = random_spikes(shape, r);
    x.s.iter_mut().for_each(|s| *s = r.random_range(-2.0..2.0));
    x
}

/// The energy written out with one loop per index.
pub fn naive_energy(v: &[f64], x: &LatentSample, p: &ModelParams) -> f64 {
    let s = p.shape;
    let mut e = 0.0;
    for d in 0..s.d {
        e += 0.5 * p.lambda[d] * v[d] * v[d];
    }
    for k in 0..s.k {
        if x.spikes.f[k] {
            e -= p.f_bias[k];
        }
        for i in 0..s.m {
            if x.spikes.g[i * s.k + k] {
                e += p.g_bias[i * s.k + k];
            }
        }
        for j in 0..s.n {
            if x.spikes.h[j * s.k + k] {
                e += p.h_bias[j * s.k + k];
            }
        }
    }
    let nt = s.m * s.n * s.k;
    for i in 0..s.m {
        for j in 0..s.n {
            for k in 0..s.k {
                let t = (i * s.n + j) * s.k + k;
                let (a, mu, sl) = (p.alpha[t], p.mu[t], x.s[t]);
                e += 0.5 * a * sl * sl;
                let gate = x.spikes.f[k] && x.spikes.g[i * s.k + k] && x.spikes.h[j * s.k + k];
                if gate {
                    let mut vw = 0.0;
                    for d in 0..s.d {
                        vw += v[d] * p.w[d * nt + t];
                    }
                    e += -vw * sl - a * mu * sl + 0.5 * a * mu * mu;
                }
            }
        }
    }
    e
}

/// Trapezoid rule on `n` uniform points over `[lo, hi]`.
pub fn trapezoid(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (hi - lo) / (n - 1) as f64;
    let mut acc = 0.5 * (f(lo) + f(hi));
    for i in 1..n - 1 {
        acc += f(lo + i as f64 * h);
    }
    acc * h
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn gaussian_draw(mean: &[f64], cov: &Covariance, r: &mut impl Rng) -> Vec<f64> {
    let z: Vec<f64> = (0..mean.len()).map(|_| r.sample(StandardNormal)).collect();
    match cov {
        Covariance::Diagonal(d) => mean.iter().zip(d).zip(&z).map(|((m, v), z)| m + v.sqrt() * z).collect(),
        Covariance::Dense(c) => {
            let l = c.clone().cholesky().expect("covariance is PD").l();
            let x = DVector::from_column_slice(mean) + l * DVector::from_vec(z);
            x.iter().copied().collect()
        }
    }
}
