//! Checks of the inference and learning code against the exact oracle on
//! tiny random models.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::gibbs::{advance_chains, init_chains, ChainInit, GibbsConfig};
use crate::meanfield::{mf_infer, mf_objective, mf_stage, MeanFieldState, MfConfig, MfInit, Stage};
use crate::model::{cond_f, cond_g, cond_h, free_energy, sigmoid};
use crate::oracle::{EnumBudget, exact_log_likelihood, exact_loglik_grad, exact_model_table, exact_posterior};
use crate::params::{BlockShape, ModelParams, SpikeConfig};

type SpikeField = fn(&mut SpikeConfig) -> &mut Vec<bool>;

/// Outcome of one oracle check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub worst: f64,
    pub tol: f64,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: worst {:.3e} (tol {:.1e}){}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tol,
            if self.detail.is_empty() { String::new() } else { format!(" {}", self.detail) }
        )
    }
}

/// Draw a shape with `D <= max_d` and `K, M, N <= 2`.
pub fn random_tiny_shape(rng: &mut impl Rng, max_d: usize) -> BlockShape {
    let d = rng.random_range(1..=max_d.max(1));
    let k = rng.random_range(1..=2);
    let m = rng.random_range(1..=2);
    let n = rng.random_range(1..=2);
    BlockShape::new(d, k, m, n).expect("nonzero dims")
}

fn pick_shape(fixed: Option<BlockShape>, rng: &mut impl Rng) -> Result<BlockShape> {
    match fixed {
        Some(shape) => {
            EnumBudget::default().check(&shape)?;
            Ok(shape)
        }
        None => Ok(random_tiny_shape(rng, 3)),
    }
}

/// Random parameters with `W ~ N(0, w_scale²)`. Each `Λ_d` exceeds the row
/// sums of `W²/α` by a margin in `[0.5, 1.5)`, which keeps every visible
/// precision positive definite.
pub fn random_tiny_model(shape: BlockShape, w_scale: f64, rng: &mut impl Rng) -> ModelParams {
    let mut p = ModelParams::new(shape);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let nt = shape.triples();
    p.w.iter_mut().for_each(|w| *w = w_scale * normal.sample(rng));
    p.mu.iter_mut().for_each(|m| *m = rng.random_range(0.5..1.5));
    p.alpha.iter_mut().for_each(|a| *a = rng.random_range(1.0..3.0));
    let col_norm2: Vec<f64> = (0..nt).map(|t| p.filter_norm(t).powi(2)).collect();
    let slack: f64 = col_norm2.iter().zip(&p.alpha).map(|(n2, a)| n2 / a).sum();
    p.lambda.iter_mut().for_each(|l| *l = slack + rng.random_range(0.5..1.5));
    for b in p.g_bias.iter_mut().chain(p.h_bias.iter_mut()).chain(p.f_bias.iter_mut()) {
        *b = normal.sample(rng);
    }
    p
}

/// A visible vector drawn around the model scale.
pub fn random_visible(p: &ModelParams, rng: &mut impl Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    p.lambda.iter().map(|l| normal.sample(rng) / l.sqrt() + 0.3).collect()
}

/// Central-difference derivative of the average exact log-likelihood over
/// `data` with respect to parameter `idx` of tensor `tensor`.
pub fn fd_loglik(p: &ModelParams, data: &[Vec<f64>], tensor: usize, idx: usize, step: f64) -> Result<f64> {
    let eval = |delta: f64| -> Result<f64> {
        let mut q = p.clone();
        q.tensors_mut()[tensor][idx] += delta;
        let mut total = 0.0;
        for v in data {
            total += exact_log_likelihood(v, &q)?;
        }
        Ok(total / data.len() as f64)
    };
    Ok((eval(step)? - eval(-step)?) / (2.0 * step))
}

/// `|a - b| / max(1, |a|, |b|)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Exact log-likelihood gradient versus finite differences on `models`
/// seeded instances with `data_per_model` visible vectors each.
pub fn check_gradients(seed: u64, shape: Option<BlockShape>, models: usize, data_per_model: usize, tol: f64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut where_ = String::new();
    for m in 0..models {
        let shape = pick_shape(shape, &mut rng)?;
        let p = random_tiny_model(shape, 0.7, &mut rng);
        let data: Vec<Vec<f64>> = (0..data_per_model).map(|_| random_visible(&p, &mut rng)).collect();
        let mut grad = crate::params::ParamGrad::zeros(shape);
        for v in &data {
            grad.add_scaled(&exact_loglik_grad(v, &p)?, 1.0 / data.len() as f64);
        }
        for (ti, g) in grad.tensors().iter().enumerate() {
            for (idx, &analytic) in g.iter().enumerate() {
                let numeric = fd_loglik(&p, &data, ti, idx, 1e-5)?;
                let e = rel_err(analytic, numeric);
                if e > worst {
                    worst = e;
                    where_ = format!("model {m} {}[{idx}]", crate::params::TENSOR_NAMES[ti]);
                }
            }
        }
    }
    Ok(CheckReport {
        name: format!("log-likelihood gradient vs finite differences ({models} models)"),
        worst,
        tol,
        passed: worst <= tol,
        detail: where_,
    })
}

/// Conditional spike probabilities versus two-point free-energy ratios,
/// for every unit of `models` random models at random states.
pub fn check_conditionals(seed: u64, shape: Option<BlockShape>, models: usize, tol: f64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut where_ = String::new();
    for m in 0..models {
        let shape = pick_shape(shape, &mut rng)?;
        let p = random_tiny_model(shape, 0.7, &mut rng);
        let v = random_visible(&p, &mut rng);
        let x = SpikeConfig::from_index(&shape, rng.random_range(0..(1u64 << shape.binary_units())));
        let groups: [(&str, Vec<f64>, SpikeField); 3] = [
            ("f", cond_f(&v, &x, &p)?, |c| &mut c.f),
            ("g", cond_g(&v, &x, &p)?, |c| &mut c.g),
            ("h", cond_h(&v, &x, &p)?, |c| &mut c.h),
        ];
        for (name, probs, field) in groups {
            for (i, &prob) in probs.iter().enumerate() {
                let (mut on, mut off) = (x.clone(), x.clone());
                field(&mut on)[i] = true;
                field(&mut off)[i] = false;
                let ratio = sigmoid(free_energy(&v, &off, &p)? - free_energy(&v, &on, &p)?);
                let e = (prob - ratio).abs();
                if e > worst {
                    worst = e;
                    where_ = format!("model {m} {name}[{i}]");
                }
            }
        }
    }
    Ok(CheckReport {
        name: format!("spike conditionals vs free-energy ratios ({models} models)"),
        worst,
        tol,
        passed: worst <= tol,
        detail: where_,
    })
}

/// Undamped stage updates never lower the variational objective.
pub fn check_mf_monotone(seed: u64, shape: Option<BlockShape>, models: usize, sweeps: usize, slack: f64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = MfConfig {
        damping: 0.0,
        ..MfConfig::default()
    };
    let mut worst: f64 = 0.0;
    let mut where_ = String::new();
    for m in 0..models {
        let shape = pick_shape(shape, &mut rng)?;
        let p = random_tiny_model(shape, 1.0, &mut rng);
        let v = random_visible(&p, &mut rng);
        let mut q = MeanFieldState::from_marginals(
            (0..shape.k).map(|_| rng.random()).collect(),
            (0..shape.m * shape.k).map(|_| rng.random()).collect(),
            (0..shape.n * shape.k).map(|_| rng.random()).collect(),
        );
        let mut prev = mf_objective(&v, &q, &p)?;
        for sweep in 0..sweeps {
            for stage in [Stage::F, Stage::G, Stage::H] {
                mf_stage(&v, &p, &mut q, stage, &cfg)?;
                let next = mf_objective(&v, &q, &p)?;
                if prev - next > worst {
                    worst = prev - next;
                    where_ = format!("model {m} sweep {sweep} stage {stage:?}");
                }
                prev = next;
            }
        }
    }
    Ok(CheckReport {
        name: format!("mean-field objective monotone ({models} models x {sweeps} sweeps)"),
        worst,
        tol: slack,
        passed: worst <= slack,
        detail: where_,
    })
}

/// Fraction of weak-coupling instances whose converged mean-field marginals
/// are within `tv` of the exact posterior marginals on every unit.
pub fn check_mf_accuracy(seed: u64, shape: Option<BlockShape>, models: usize, tv: f64, min_frac: f64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = MfConfig {
        init: MfInit::UniformHalf,
        max_sweeps: 500,
        tol: 1e-10,
        ..MfConfig::default()
    };
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..models {
        let shape = pick_shape(shape, &mut rng)?;
        let p = random_tiny_model(shape, 0.1, &mut rng);
        let v = random_visible(&p, &mut rng);
        let q = mf_infer(&v, &p, &cfg)?;
        let (f, g, h) = exact_posterior(&v, &p)?.unit_marginals();
        let err = q
            .f_hat
            .iter()
            .chain(&q.g_hat)
            .chain(&q.h_hat)
            .zip(f.iter().chain(&g).chain(&h))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(err);
        good += (err <= tv) as usize;
    }
    let frac = good as f64 / models as f64;
    Ok(CheckReport {
        name: format!("mean-field marginals within {tv} of exact posterior ({models} weak-coupling models)"),
        worst,
        tol: tv,
        passed: frac >= min_frac,
        detail: format!("{good}/{models} instances within tolerance (need {:.0}%)", 100.0 * min_frac),
    })
}

/// A fixed small model used for the sampler check.
pub fn gibbs_reference_model() -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6769_6262);
    let shape = BlockShape::new(2, 2, 2, 1).expect("shape");
    random_tiny_model(shape, 0.8, &mut rng)
}

/// Empirical spike marginals from `total_sweeps` post-burn-in sweeps (split
/// over `n_chains` chains) against exact model marginals.
pub fn check_gibbs(
    p: &ModelParams,
    seed: u64,
    n_chains: usize,
    total_sweeps: usize,
    burn_in: usize,
    tol: f64,
) -> Result<CheckReport> {
    let cfg = GibbsConfig {
        n_chains,
        seed,
        ..GibbsConfig::default()
    };
    let mut chains = init_chains(p, &cfg, ChainInit::Noise)?;
    advance_chains(&mut chains, p, &cfg, burn_in)?;
    let s = p.shape;
    let units = s.binary_units();
    let mut counts = vec![0u64; units];
    let per_chain = total_sweeps.div_ceil(n_chains);
    for _ in 0..per_chain {
        advance_chains(&mut chains, p, &cfg, 1)?;
        for c in &chains {
            let bits = c.x.spikes.f.iter().chain(&c.x.spikes.g).chain(&c.x.spikes.h);
            counts.iter_mut().zip(bits).for_each(|(n, &b)| *n += b as u64);
        }
    }
    let n = (per_chain * n_chains) as f64;
    let (f, g, h) = exact_model_table(p)?.unit_marginals();
    let mut worst: f64 = 0.0;
    let mut where_ = String::new();
    for (i, (c, exact)) in counts.iter().zip(f.iter().chain(&g).chain(&h)).enumerate() {
        let e = (*c as f64 / n - exact).abs();
        if e > worst {
            worst = e;
            where_ = format!("unit {i}: exact {exact:.4}");
        }
    }
    Ok(CheckReport {
        name: format!("Gibbs spike marginals vs exact ({} sweeps)", per_chain * n_chains),
        worst,
        tol,
        passed: worst <= tol,
        detail: where_,
    })
}

/// Settings of the suite run by the `verify` command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub models: usize,
    /// Fixed shape for every random model; random tiny shapes when unset.
    pub shape: Option<BlockShape>,
    pub gibbs_sweeps: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            models: 20,
            shape: None,
            gibbs_sweeps: 100_000,
        }
    }
}

/// Gradient, conditional, mean-field and Gibbs checks at their standard
/// tolerances.
pub fn default_suite(cfg: &SuiteConfig) -> Result<Vec<CheckReport>> {
    let (seed, n, shape) = (cfg.seed, cfg.models, cfg.shape);
    let gibbs_model = match shape {
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 5);
            random_tiny_model(pick_shape(Some(s), &mut rng)?, 0.8, &mut rng)
        }
        None => gibbs_reference_model(),
    };
    Ok(vec![
        check_gradients(seed, shape, n, 3, 1e-5)?,
        check_conditionals(seed ^ 1, shape, n, 1e-10)?,
        check_mf_monotone(seed ^ 2, shape, n, 10, 1e-9)?,
        check_mf_accuracy(seed ^ 3, shape, n, 0.05, 0.9)?,
        check_gibbs(&gibbs_model, seed ^ 4, 8, cfg.gibbs_sweeps, 1_000, 0.02)?,
    ])
}
