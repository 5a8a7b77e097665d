//! Block Gibbs transition kernel and persistent chains.
//!
//! Each chain owns a counter-based ChaCha stream selected by
//! `(seed, rng_stream_id)`; the stream position is stored in the chain, so a
//! chain's trajectory does not depend on how many chains run or on thread
//! scheduling, and chains can be checkpointed and resumed exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{f_logits, g_logits, h_logits, sigmoid, slab_drive, BiasSign};
use crate::params::{LatentSample, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsConfig {
    pub n_chains: usize,
    pub steps_per_update: usize,
    pub seed: u64,
    /// Hold every `f_k` at 1.
    pub clamp_f: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            n_chains: 64,
            steps_per_update: 1,
            seed: 0,
            clamp_f: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub x: LatentSample,
    pub v: Vec<f64>,
    pub rng_stream_id: u64,
    /// Position in the chain's ChaCha stream, in 32-bit words.
    pub rng_word_pos: u128,
}

impl ChainState {
    /// Generator positioned where this chain left off.
    pub fn rng(&self, seed: u64) -> ChaCha8Rng {
        chain_rng(seed, self.rng_stream_id, self.rng_word_pos)
    }
}

pub fn chain_rng(seed: u64, stream: u64, word_pos: u128) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainInit<'a> {
    /// `v ~ N(0, Λ⁻¹)`, spikes and slabs zero.
    Noise,
    /// Chain `c` starts at row `c mod n` of the given row-major data.
    Data { rows: &'a [f64], dim: usize },
}

#[inline]
fn bernoulli<R: Rng + ?Sized>(rng: &mut R, prob: f64) -> bool {
    rng.random::<f64>() < prob
}

#[inline]
fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample::<f64, _>(StandardNormal)
}

fn as_unit(on: &[bool]) -> Vec<f64> {
    on.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// One sweep: resample `f`, `g`, `h`, `s`, then `v`, each block from its exact
/// conditional given the rest.
pub fn gibbs_step<R: Rng + ?Sized>(
    c: &ChainState,
    p: &ModelParams,
    cfg: &GibbsConfig,
    rng: &mut R,
) -> Result<ChainState> {
    let shape = p.shape;
    c.x.check(&shape)?;
    crate::error::check_len("v", shape.d, c.v.len())?;
    let u = p.projections(&c.v);
    let r = slab_drive(p, &u);
    let mut x = c.x.clone();

    if cfg.clamp_f {
        x.spikes.f.iter_mut().for_each(|f| *f = true);
    } else {
        let l = f_logits(p, &r, &as_unit(&x.spikes.g), &as_unit(&x.spikes.h));
        for (f, l) in x.spikes.f.iter_mut().zip(l) {
            *f = bernoulli(rng, sigmoid(l));
        }
    }
    let l = g_logits(p, &r, &as_unit(&x.spikes.f), &as_unit(&x.spikes.h), BiasSign::Energy);
    for (g, l) in x.spikes.g.iter_mut().zip(l) {
        *g = bernoulli(rng, sigmoid(l));
    }
    let l = h_logits(p, &r, &as_unit(&x.spikes.f), &as_unit(&x.spikes.g), BiasSign::Energy);
    for (h, l) in x.spikes.h.iter_mut().zip(l) {
        *h = bernoulli(rng, sigmoid(l));
    }

    for t in 0..shape.triples() {
        let sd = p.alpha[t].sqrt().recip();
        let mean = if x.spikes.active(&shape, t) {
            u[t] / p.alpha[t] + p.mu[t]
        } else {
            0.0
        };
        x.s[t] = mean + sd * normal(rng);
    }

    let nt = shape.triples();
    let gated: Vec<f64> = (0..nt)
        .map(|t| if x.spikes.active(&shape, t) { x.s[t] } else { 0.0 })
        .collect();
    let mut v = vec![0.0; shape.d];
    for (dim, vd) in v.iter_mut().enumerate() {
        let row = &p.w[dim * nt..(dim + 1) * nt];
        let lam = p.lambda[dim];
        let mean = row.iter().zip(&gated).map(|(w, s)| w * s).sum::<f64>() / lam;
        *vd = mean + normal(rng) / lam.sqrt();
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            stage: "gibbs visible",
            sweep: 0,
        });
    }
    Ok(ChainState {
        x,
        v,
        rng_stream_id: c.rng_stream_id,
        rng_word_pos: c.rng_word_pos,
    })
}

/// Fresh chains, chain `c` on stream `c`.
pub fn init_chains(p: &ModelParams, cfg: &GibbsConfig, init: ChainInit<'_>) -> Result<Vec<ChainState>> {
    if cfg.n_chains == 0 {
        return Err(Error::InvalidConfig("n_chains must be >= 1".into()));
    }
    let shape = p.shape;
    (0..cfg.n_chains as u64)
        .map(|id| {
            let mut rng = chain_rng(cfg.seed, id, 0);
            let v = match init {
                ChainInit::Noise => p
                    .lambda
                    .iter()
                    .map(|l| normal(&mut rng) / l.sqrt())
                    .collect(),
                ChainInit::Data { rows, dim } => {
                    crate::error::check_len("data dim", shape.d, dim)?;
                    let n = rows.len() / dim;
                    if n == 0 {
                        return Err(Error::InvalidConfig("no data rows to clamp chains".into()));
                    }
                    let row = (id as usize) % n;
                    rows[row * dim..(row + 1) * dim].to_vec()
                }
            };
            let mut x = LatentSample::zeros(&shape);
            if cfg.clamp_f {
                x.spikes.f.iter_mut().for_each(|f| *f = true);
            }
            Ok(ChainState {
                x,
                v,
                rng_stream_id: id,
                rng_word_pos: rng.get_word_pos(),
            })
        })
        .collect()
}

/// Advance every chain `steps` sweeps in place, in parallel.
pub fn advance_chains(
    chains: &mut [ChainState],
    p: &ModelParams,
    cfg: &GibbsConfig,
    steps: usize,
) -> Result<()> {
    chains.par_iter_mut().try_for_each(|c| -> Result<()> {
        let mut rng = c.rng(cfg.seed);
        for _ in 0..steps {
            *c = gibbs_step(c, p, cfg, &mut rng)?;
        }
        c.rng_word_pos = rng.get_word_pos();
        Ok(())
    })
}

/// Initialize chains and advance them `steps_per_update` sweeps.
pub fn run_chains(p: &ModelParams, cfg: &GibbsConfig, init: ChainInit<'_>) -> Result<Vec<ChainState>> {
    let mut chains = init_chains(p, cfg, init)?;
    advance_chains(&mut chains, p, cfg, cfg.steps_per_update)?;
    Ok(chains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::BlockShape;

    fn model() -> ModelParams {
        let shape = BlockShape::new(3, 2, 2, 2).unwrap();
        let mut p = ModelParams::new(shape);
        p.lambda = vec![4.0; 3];
        p.w.iter_mut().enumerate().for_each(|(i, w)| *w = 0.2 * ((i * 3) as f64).sin());
        p
    }

    #[test]
    fn zero_steps_is_identity() {
        let p = model();
        let cfg = GibbsConfig {
            n_chains: 5,
            steps_per_update: 0,
            seed: 9,
            clamp_f: false,
        };
        let a = init_chains(&p, &cfg, ChainInit::Noise).unwrap();
        let b = run_chains(&p, &cfg, ChainInit::Noise).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fixed_seed_reproduces_trajectory() {
        let p = model();
        let cfg = GibbsConfig {
            n_chains: 3,
            steps_per_update: 25,
            seed: 4,
            clamp_f: false,
        };
        let a = run_chains(&p, &cfg, ChainInit::Noise).unwrap();
        let b = run_chains(&p, &cfg, ChainInit::Noise).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chain_streams_do_not_depend_on_chain_count() {
        let p = model();
        let small = GibbsConfig {
            n_chains: 2,
            steps_per_update: 10,
            seed: 1,
            clamp_f: false,
        };
        let big = GibbsConfig { n_chains: 7, ..small };
        let a = run_chains(&p, &small, ChainInit::Noise).unwrap();
        let b = run_chains(&p, &big, ChainInit::Noise).unwrap();
        assert_eq!(a[..], b[..2]);
    }

    #[test]
    fn split_advance_matches_single_advance() {
        let p = model();
        let cfg = GibbsConfig {
            n_chains: 4,
            steps_per_update: 1,
            seed: 2,
            clamp_f: false,
        };
        let mut a = init_chains(&p, &cfg, ChainInit::Noise).unwrap();
        let mut b = a.clone();
        advance_chains(&mut a, &p, &cfg, 6).unwrap();
        advance_chains(&mut b, &p, &cfg, 2).unwrap();
        advance_chains(&mut b, &p, &cfg, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn data_clamped_init_copies_rows() {
        let p = model();
        let rows = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let cfg = GibbsConfig {
            n_chains: 3,
            ..Default::default()
        };
        let chains = init_chains(&p, &cfg, ChainInit::Data { rows: &rows, dim: 3 }).unwrap();
        assert_eq!(chains[0].v, vec![1.0, 2.0, 3.0]);
        assert_eq!(chains[2].v, vec![1.0, 2.0, 3.0]);
        assert_eq!(chains[1].v, vec![4.0, 5.0, 6.0]);
    }

    #[test]
    fn clamped_f_chains_keep_f_on() {
        let mut p = model();
        p.f_bias = vec![-50.0, -50.0];
        let cfg = GibbsConfig {
            n_chains: 4,
            steps_per_update: 5,
            seed: 3,
            clamp_f: true,
        };
        let chains = run_chains(&p, &cfg, ChainInit::Noise).unwrap();
        assert!(chains.iter().all(|c| c.x.spikes.f.iter().all(|&f| f)));
    }
}
