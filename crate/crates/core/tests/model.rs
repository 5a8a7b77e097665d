#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use hoss_core::model::{
    cond_f, cond_g, cond_h, cond_s, cond_v_given_fgh, cond_v_given_sfgh, energy, energy_grad,
    free_energy, sigmoid,
};
use hoss_core::{BlockShape, Covariance, LatentSample, ModelParams, SpikeConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

fn arb_instance() -> impl Strategy<Value = (ModelParams, Vec<f64>, LatentSample)> {
    (1usize..5, 1usize..3, 1usize..4, 1usize..4, any::<u64>()).prop_map(|(d, k, m, n, seed)| {
        let p = tiny(d, k, m, n, seed);
        let mut r = rng(seed ^ 0xabc);
        let v = random_v(&p, &mut r);
        let x = random_latent(&p.shape, &mut r);
        (p, v, x)
    })
}

proptest! {
    #[test]
    fn energy_matches_naive_loops((p, v, x) in arb_instance()) {
        let fast = energy(&v, &x, &p).unwrap();
        let slow = naive_energy(&v, &x, &p);
        prop_assert!((fast - slow).abs() <= 1e-12 * fast.abs().max(slow.abs()).max(1.0),
            "fast {fast} naive {slow}");
    }

    #[test]
    fn visible_given_slabs_matches_naive((p, _v, x) in arb_instance()) {
        let g = cond_v_given_sfgh(&x, &p).unwrap();
        let s = p.shape;
        for d in 0..s.d {
            let mut acc = 0.0;
            for t in 0..s.triples() {
                if x.spikes.active(&s, t) {
                    acc += p.w_at(d, t) * x.s[t];
                }
            }
            let want = acc / p.lambda[d];
            prop_assert!((g.mean[d] - want).abs() <= 1e-12 * want.abs().max(1.0));
            prop_assert!((g.variance(d) - 1.0 / p.lambda[d]).abs() <= 1e-15);
        }
    }

    #[test]
    fn slab_conditional_matches_naive((p, v, x) in arb_instance()) {
        let out = cond_s(&v, &x.spikes, &p).unwrap();
        let s = p.shape;
        for t in 0..s.triples() {
            let u: f64 = (0..s.d).map(|d| v[d] * p.w_at(d, t)).sum();
            let want = if x.spikes.active(&s, t) { u / p.alpha[t] + p.mu[t] } else { 0.0 };
            prop_assert!((out.mean[t] - want).abs() <= 1e-12 * want.abs().max(1.0));
            prop_assert!((out.variance(t) - 1.0 / p.alpha[t]).abs() <= 1e-15);
        }
    }
}

#[test]
fn seeded_energy_instance_matches_naive() {
    let p = tiny(2, 1, 2, 2, 7);
    let mut r = rng(8);
    for _ in 0..50 {
        let v = random_v(&p, &mut r);
        let x = random_latent(&p.shape, &mut r);
        let (a, b) = (energy(&v, &x, &p).unwrap(), naive_energy(&v, &x, &p));
        assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()), "{a} vs {b}");
    }
}

/// `log ∫ exp(-E) ds` over a dense grid, slab by slab in nested loops.
fn grid_log_integral(v: &[f64], spikes: &SpikeConfig, p: &ModelParams, pts: usize) -> f64 {
    let nt = p.shape.triples();
    assert!(nt <= 2, "grid quadrature only for one or two slabs");
    let span: Vec<(f64, f64)> = (0..nt)
        .map(|t| {
            let sd = 1.0 / p.alpha[t].sqrt();
            let u: f64 = (0..p.shape.d).map(|d| v[d] * p.w_at(d, t)).sum();
            let c = u / p.alpha[t] + p.mu[t];
            (c.min(0.0) - 14.0 * sd, c.max(0.0) + 14.0 * sd)
        })
        .collect();
    let mut x = LatentSample::zeros(&p.shape);
    x.spikes = spikes.clone();
    let e0 = naive_energy(v, &x, p);
    let eval = |s: &[f64]| {
        let mut y = x.clone();
        y.s.copy_from_slice(s);
        (e0 - naive_energy(v, &y, p)).exp()
    };
    let total = if nt == 1 {
        trapezoid(span[0].0, span[0].1, pts, |a| eval(&[a]))
    } else {
        trapezoid(span[0].0, span[0].1, pts, |a| {
            trapezoid(span[1].0, span[1].1, pts, |b| eval(&[a, b]))
        })
    };
    total.ln() - e0
}

#[test]
fn decoupled_free_energy_matches_1d_quadrature() {
    let shape = BlockShape::new(3, 2, 2, 1).unwrap();
    let mut p = ModelParams::new(shape);
    p.mu = vec![0.7, 1.3, 2.0, 1.1];
    p.lambda = vec![0.5, 1.5, 2.0];
    let v = [0.3, -1.2, 0.8];
    let mut r = rng(3);
    for _ in 0..8 {
        let x = random_spikes(&shape, &mut r);
        let f = free_energy(&v, &x, &p).unwrap();
        let mut quad = 0.5 * v.iter().zip(&p.lambda).map(|(a, l)| l * a * a).sum::<f64>();
        for t in 0..shape.triples() {
            let on = x.active(&shape, t);
            let mu = p.mu[t];
            let integrand = |s: f64| {
                let e = 0.5 * s * s + if on { -mu * s + 0.5 * mu * mu } else { 0.0 };
                (-e).exp()
            };
            quad -= trapezoid(-25.0, 25.0, 4001, integrand).ln();
        }
        let expected = 0.5 * v.iter().zip(&p.lambda).map(|(a, l)| l * a * a).sum::<f64>()
            - shape.triples() as f64 * 0.5 * LN_2PI;
        assert!(rel_err(f, quad) <= 1e-8, "F {f} quadrature {quad}");
        assert!(rel_err(f, expected) <= 1e-12);
    }
}

#[test]
fn free_energy_matches_grid_quadrature_over_slabs() {
    let p = tiny(2, 1, 1, 2, 11);
    let mut r = rng(12);
    for _ in 0..6 {
        let v = random_v(&p, &mut r);
        let x = random_spikes(&p.shape, &mut r);
        let f = free_energy(&v, &x, &p).unwrap();
        let grid = grid_log_integral(&v, &x, &p, 801);
        assert!((grid + f).abs() <= 1e-6, "-F {} grid {grid}", -f);
    }
    let v = random_v(&p, &mut r);
    let on = SpikeConfig::ones(&p.shape);
    let f = free_energy(&v, &on, &p).unwrap();
    assert!((grid_log_integral(&v, &on, &p, 801) + f).abs() <= 1e-6);
}

#[test]
fn free_energy_with_blocks_off() {
    let p = tiny(3, 2, 2, 2, 5);
    let v = [0.4, -0.1, 0.9];
    let mut x = SpikeConfig::ones(&p.shape);
    x.f.iter_mut().for_each(|f| *f = false);
    let f = free_energy(&v, &x, &p).unwrap();
    let want = 0.5 * v.iter().zip(&p.lambda).map(|(a, l)| l * a * a).sum::<f64>()
        + p.g_bias.iter().sum::<f64>()
        + p.h_bias.iter().sum::<f64>()
        - p.alpha.iter().map(|a| 0.5 * (2.0 * std::f64::consts::PI / a).ln()).sum::<f64>();
    assert!(rel_err(f, want) <= 1e-12);
}

fn flip_prob(v: &[f64], x: &SpikeConfig, p: &ModelParams, set: impl Fn(&mut SpikeConfig, bool)) -> f64 {
    let (mut on, mut off) = (x.clone(), x.clone());
    set(&mut on, true);
    set(&mut off, false);
    let (f1, f0) = (free_energy(v, &on, p).unwrap(), free_energy(v, &off, p).unwrap());
    1.0 / (1.0 + (f1 - f0).exp())
}

#[test]
fn conditionals_match_free_energy_ratios() {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut r = rng(100 + seed);
        let (d, k, m, n) = (r.random_range(1..4), r.random_range(1..3), r.random_range(1..3), r.random_range(1..3));
        let p = tiny(d, k, m, n, seed);
        let v = random_v(&p, &mut r);
        let x = random_spikes(&p.shape, &mut r);
        let (pf, pg, ph) = (cond_f(&v, &x, &p).unwrap(), cond_g(&v, &x, &p).unwrap(), cond_h(&v, &x, &p).unwrap());
        for (u, &got) in pf.iter().enumerate() {
            worst = worst.max((got - flip_prob(&v, &x, &p, |c, b| c.f[u] = b)).abs());
        }
        for (u, &got) in pg.iter().enumerate() {
            worst = worst.max((got - flip_prob(&v, &x, &p, |c, b| c.g[u] = b)).abs());
        }
        for (u, &got) in ph.iter().enumerate() {
            worst = worst.max((got - flip_prob(&v, &x, &p, |c, b| c.h[u] = b)).abs());
        }
    }
    assert!(worst <= 1e-10, "worst conditional error {worst}");
}

#[test]
fn flat_model_conditionals() {
    let shape = BlockShape::new(2, 2, 2, 2).unwrap();
    let mut p = ModelParams::new(shape);
    let v = [0.5, -0.5];
    let x = SpikeConfig::ones(&shape);
    assert!(cond_g(&v, &x, &p).unwrap().iter().all(|&q| q == 0.5));
    p.f_bias = vec![2.0, 2.0];
    let f = cond_f(&v, &x, &p).unwrap();
    assert!((f[0] - 0.880_797_077_977_882_3).abs() < 1e-12);
    assert_eq!(f[0], sigmoid(2.0));
}

#[test]
fn scalar_visible_marginal_example() {
    let shape = BlockShape::new(1, 1, 1, 1).unwrap();
    let mut p = ModelParams::new(shape);
    p.w = vec![1.0];
    p.lambda = vec![2.0];
    p.alpha = vec![4.0];
    let g = cond_v_given_fgh(&SpikeConfig::ones(&shape), &p).unwrap();
    assert!((g.variance(0) - 4.0 / 7.0).abs() < 1e-14);
}

fn dense(cov: &Covariance, d: usize) -> DMatrix<f64> {
    match cov {
        Covariance::Dense(m) => m.clone(),
        Covariance::Diagonal(v) => DMatrix::from_diagonal(&DVector::from_column_slice(&v[..d])),
    }
}

#[test]
fn visible_marginal_covariance_is_symmetric_positive_definite() {
    for seed in 0..10 {
        let p = tiny(3, 2, 2, 1, seed);
        let mut r = rng(seed + 50);
        let x = random_spikes(&p.shape, &mut r);
        let g = cond_v_given_fgh(&x, &p).unwrap();
        let c = dense(&g.cov, 3);
        assert!((&c - c.transpose()).amax() <= 1e-12);
        let eig = c.symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|&e| e > 0.0), "eigenvalues {eig}");
    }
}

#[test]
fn alternating_slab_visible_draws_match_visible_marginal() {
    let p = tiny(2, 1, 1, 2, 21);
    let mut x = LatentSample::zeros(&p.shape);
    x.spikes = SpikeConfig::ones(&p.shape);
    let target = cond_v_given_fgh(&x.spikes, &p).unwrap();
    let cov = dense(&target.cov, 2);

    let n = 100_000;
    let mut r = rng(22);
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        let mut v = vec![0.0; 2];
        for _ in 0..25 {
            let s = cond_s(&v, &x.spikes, &p).unwrap();
            for t in 0..p.shape.triples() {
                x.s[t] = s.mean[t] + s.variance(t).sqrt() * r.sample::<f64, _>(StandardNormal);
            }
            let g = cond_v_given_sfgh(&x, &p).unwrap();
            for d in 0..2 {
                v[d] = g.mean[d] + g.variance(d).sqrt() * r.sample::<f64, _>(StandardNormal);
            }
        }
        draws.push(v);
    }
    for d in 0..2 {
        let mean = draws.iter().map(|v| v[d]).sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v[d] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se_mean = (cov[(d, d)] / n as f64).sqrt();
        let se_var = cov[(d, d)] * (2.0 / (n - 1) as f64).sqrt();
        assert!((mean - target.mean[d]).abs() <= 3.0 * se_mean, "dim {d} mean {mean} vs {}", target.mean[d]);
        assert!((var - cov[(d, d)]).abs() <= 3.0 * se_var, "dim {d} var {var} vs {}", cov[(d, d)]);
    }
    let m0 = draws.iter().map(|v| v[0]).sum::<f64>() / n as f64;
    let m1 = draws.iter().map(|v| v[1]).sum::<f64>() / n as f64;
    let c01 = draws.iter().map(|v| (v[0] - m0) * (v[1] - m1)).sum::<f64>() / (n - 1) as f64;
    let se_c = ((cov[(0, 0)] * cov[(1, 1)] + cov[(0, 1)].powi(2)) / (n - 1) as f64).sqrt();
    assert!((c01 - cov[(0, 1)]).abs() <= 3.0 * se_c, "cov {c01} vs {}", cov[(0, 1)]);
}

#[test]
fn energy_gradient_matches_finite_differences() {
    let step = 1e-5;
    for seed in 0..5 {
        let mut p = tiny(2, 2, 2, 1, seed);
        let mut r = rng(seed + 300);
        let v = random_v(&p, &mut r);
        let x = random_latent(&p.shape, &mut r);
        let g = energy_grad(&v, &x, &p).unwrap();
        let analytic: Vec<Vec<f64>> = g.tensors().iter().map(|t| t.to_vec()).collect();
        for (ti, grad) in analytic.iter().enumerate() {
            for e in 0..grad.len() {
                let orig = p.tensors_mut()[ti][e];
                p.tensors_mut()[ti][e] = orig + step;
                let up = energy(&v, &x, &p).unwrap();
                p.tensors_mut()[ti][e] = orig - step;
                let down = energy(&v, &x, &p).unwrap();
                p.tensors_mut()[ti][e] = orig;
                let fd = -(up - down) / (2.0 * step);
                let err = (fd - grad[e]).abs() / fd.abs().max(grad[e].abs()).max(1.0);
                assert!(err <= 1e-6, "seed {seed} tensor {ti} entry {e}: fd {fd} analytic {}", grad[e]);
            }
        }
    }
}

#[test]
fn inactive_triple_has_zero_filter_gradient() {
    let p = tiny(3, 1, 2, 2, 9);
    let mut r = rng(10);
    let v = random_v(&p, &mut r);
    let mut x = random_latent(&p.shape, &mut r);
    x.spikes.f[0] = true;
    x.spikes.g = vec![true, false];
    x.spikes.h = vec![true, true];
    let g = energy_grad(&v, &x, &p).unwrap();
    let nt = p.shape.triples();
    for t in 0..nt {
        let zero = (0..3).all(|d| g.w[d * nt + t] == 0.0);
        assert_eq!(zero, !x.spikes.active(&p.shape, t), "triple {t}");
    }
}
