mod common;

use common::*;
use hoss_core::gibbs::{advance_chains, chain_rng, gibbs_step, init_chains};
use hoss_core::model::{cond_s, cond_v_given_fgh, sigmoid};
use hoss_core::oracle::exact_model_table;
use hoss_core::{BlockShape, ChainInit, ChainState, GibbsConfig, LatentSample, ModelParams, SpikeConfig};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn cfg(n_chains: usize, seed: u64) -> GibbsConfig {
    GibbsConfig {
        n_chains,
        steps_per_update: 1,
        seed,
        clamp_f: false,
    }
}

#[test]
fn flat_model_first_step_draws_f_from_its_bias() {
    let shape = BlockShape::new(2, 2, 2, 2).unwrap();
    let mut p = ModelParams::new(shape);
    p.f_bias = vec![1.5, -0.7];
    let n = 100_000;
    let c = cfg(n, 5);
    let mut chains = init_chains(&p, &c, ChainInit::Noise).unwrap();
    advance_chains(&mut chains, &p, &c, 1).unwrap();
    for k in 0..2 {
        let q = sigmoid(p.f_bias[k]);
        let freq = chains.iter().filter(|c| c.x.spikes.f[k]).count() as f64 / n as f64;
        let se = (q * (1.0 - q) / n as f64).sqrt();
        assert!((freq - q).abs() <= 3.0 * se, "f_{k}: {freq} vs {q}");
    }
}

#[test]
fn long_run_marginals_match_oracle() {
    let p = tiny(2, 1, 2, 2, 31);
    let table = exact_model_table(&p).unwrap();
    let (fe, ge, he) = table.unit_marginals();

    let c = cfg(100, 32);
    let mut chains = init_chains(&p, &c, ChainInit::Noise).unwrap();
    advance_chains(&mut chains, &p, &c, 500).unwrap();
    let sweeps = 1000;
    let (mut f, mut g, mut h) = (vec![0.0; fe.len()], vec![0.0; ge.len()], vec![0.0; he.len()]);
    for _ in 0..sweeps {
        advance_chains(&mut chains, &p, &c, 1).unwrap();
        for ch in &chains {
            let x = &ch.x.spikes;
            x.f.iter().zip(&mut f).for_each(|(&b, a)| *a += b as u8 as f64);
            x.g.iter().zip(&mut g).for_each(|(&b, a)| *a += b as u8 as f64);
            x.h.iter().zip(&mut h).for_each(|(&b, a)| *a += b as u8 as f64);
        }
    }
    let total = (sweeps * chains.len()) as f64;
    for (emp, exact) in [(&f, &fe), (&g, &ge), (&h, &he)] {
        for (a, b) in emp.iter().zip(exact.iter()) {
            let tv = (a / total - b).abs();
            assert!(tv <= 0.02, "empirical {} vs exact {b}", a / total);
        }
    }
}

fn sample_spikes(probs: &[f64], shape: &BlockShape, r: &mut impl Rng) -> SpikeConfig {
    let u: f64 = r.random();
    let mut acc = 0.0;
    for (i, &q) in probs.iter().enumerate() {
        acc += q;
        if u < acc {
            return SpikeConfig::from_index(shape, i as u64);
        }
    }
    SpikeConfig::from_index(shape, probs.len() as u64 - 1)
}

#[test]
fn one_step_preserves_the_joint_distribution() {
    let p = tiny(2, 1, 1, 2, 61);
    let table = exact_model_table(&p).unwrap();
    let c = cfg(1, 62);
    let reps = 100_000;
    let mut r = rng(63);
    let mut counts = vec![0usize; table.probs.len()];
    for rep in 0..reps {
        let mut x = LatentSample::zeros(&p.shape);
        x.spikes = sample_spikes(&table.probs, &p.shape, &mut r);
        let vm = cond_v_given_fgh(&x.spikes, &p).unwrap();
        let v = gaussian_draw(&vm.mean, &vm.cov, &mut r);
        let sm = cond_s(&v, &x.spikes, &p).unwrap();
        x.s = gaussian_draw(&sm.mean, &sm.cov, &mut r);
        let state = ChainState {
            x,
            v,
            rng_stream_id: rep as u64,
            rng_word_pos: 0,
        };
        let mut step_rng = chain_rng(c.seed, rep as u64, 0);
        let next = gibbs_step(&state, &p, &c, &mut step_rng).unwrap();
        counts[next.x.spikes.to_index() as usize] += 1;
    }

    let (mut stat, mut bins) = (0.0, 0usize);
    let (mut rest_obs, mut rest_exp) = (0.0, 0.0);
    for (&obs, &q) in counts.iter().zip(&table.probs) {
        let expected = q * reps as f64;
        if expected < 5.0 {
            rest_obs += obs as f64;
            rest_exp += expected;
            continue;
        }
        stat += (obs as f64 - expected).powi(2) / expected;
        bins += 1;
    }
    if rest_exp >= 5.0 {
        stat += (rest_obs - rest_exp).powi(2) / rest_exp;
        bins += 1;
    }
    let pval = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
    assert!(pval > 1e-3, "chi-square {stat} over {bins} bins, p = {pval}");
}

#[test]
fn chain_results_do_not_depend_on_order() {
    let p = tiny(3, 2, 2, 1, 71);
    let c = cfg(16, 72);
    let mut a = init_chains(&p, &c, ChainInit::Noise).unwrap();
    let mut b: Vec<ChainState> = a.iter().rev().cloned().collect();
    advance_chains(&mut a, &p, &c, 20).unwrap();
    advance_chains(&mut b, &p, &c, 20).unwrap();
    b.reverse();
    assert_eq!(a, b);
}
