//! Brute-force ground truth for tiny models.
//!
//! Every binary configuration `(f, g, h)` is enumerated; slabs and visibles are
//! integrated in closed form per configuration. All sums are accumulated in the
//! log domain and reduced in enumeration order, so results do not depend on
//! how the per-configuration work is scheduled.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    bias_energy, free_energy_from_drive, set_bias_grads, slab_drive, slab_log_normalizer,
    visible_marginal,
};
use crate::params::{BlockShape, ModelParams, ParamGrad, SpikeConfig};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Upper bound on the number of enumerated binary units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumBudget {
    pub max_binary_vars: usize,
}

impl Default for EnumBudget {
    fn default() -> Self {
        Self { max_binary_vars: 20 }
    }
}

impl EnumBudget {
    pub fn check(&self, shape: &BlockShape) -> Result<u64> {
        let needed = shape.binary_units();
        if needed > self.max_binary_vars || needed >= 63 {
            return Err(Error::BudgetExceeded {
                needed,
                budget: self.max_binary_vars,
            });
        }
        Ok(1u64 << needed)
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// A normalized distribution over all spike configurations, indexed by
/// [`SpikeConfig::to_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigTable {
    pub shape: BlockShape,
    pub probs: Vec<f64>,
}

impl ConfigTable {
    fn from_log_weights(shape: BlockShape, logw: &[f64]) -> Self {
        let lse = log_sum_exp(logw);
        let probs = logw.iter().map(|l| (l - lse).exp()).collect();
        Self { shape, probs }
    }

    pub fn prob(&self, x: &SpikeConfig) -> f64 {
        self.probs[x.to_index() as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (SpikeConfig, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, &p)| (SpikeConfig::from_index(&self.shape, i as u64), p))
    }

    /// Marginal `P(unit = 1)` for every `f`, `g` and `h` unit.
    pub fn unit_marginals(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let s = self.shape;
        let (mut f, mut g, mut h) = (vec![0.0; s.k], vec![0.0; s.m * s.k], vec![0.0; s.n * s.k]);
        for (x, p) in self.iter() {
            let add = |acc: &mut [f64], on: &[bool]| {
                acc.iter_mut().zip(on).filter(|(_, &b)| b).for_each(|(a, _)| *a += p);
            };
            add(&mut f, &x.f);
            add(&mut g, &x.g);
            add(&mut h, &x.h);
        }
        (f, g, h)
    }

    /// `P(f_k g_ik h_jk = 1)` for every triple.
    pub fn gate_marginals(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.shape.triples()];
        for (x, p) in self.iter() {
            for (t, qt) in q.iter_mut().enumerate() {
                if x.active(&self.shape, t) {
                    *qt += p;
                }
            }
        }
        q
    }
}

fn configs(shape: &BlockShape, budget: EnumBudget) -> Result<Vec<SpikeConfig>> {
    let count = budget.check(shape)?;
    Ok((0..count).map(|i| SpikeConfig::from_index(shape, i)).collect())
}

/// `log ∫∫ exp(-E) ds dv` for one spike configuration.
fn config_log_mass(x: &SpikeConfig, p: &ModelParams) -> Result<f64> {
    let vm = visible_marginal(x, p)?;
    let d = p.shape.d as f64;
    Ok(-bias_energy(p, x) + slab_log_normalizer(p) + 0.5 * d * LN_2PI
        - 0.5 * vm.log_det_precision
        + 0.5 * vm.b.dot(&vm.mean))
}

fn model_log_masses(p: &ModelParams, budget: EnumBudget) -> Result<Vec<f64>> {
    p.validate()?;
    configs(&p.shape, budget)?
        .par_iter()
        .map(|x| config_log_mass(x, p))
        .collect()
}

/// Exact log partition function.
pub fn exact_log_z(p: &ModelParams) -> Result<f64> {
    exact_log_z_with(p, EnumBudget::default())
}

pub fn exact_log_z_with(p: &ModelParams, budget: EnumBudget) -> Result<f64> {
    Ok(log_sum_exp(&model_log_masses(p, budget)?))
}

/// Exact model distribution over spike configurations, `p(f,g,h)`.
pub fn exact_model_table(p: &ModelParams) -> Result<ConfigTable> {
    let logw = model_log_masses(p, EnumBudget::default())?;
    Ok(ConfigTable::from_log_weights(p.shape, &logw))
}

fn posterior_log_weights(v: &[f64], p: &ModelParams, budget: EnumBudget) -> Result<Vec<f64>> {
    p.validate()?;
    crate::error::check_len("v", p.shape.d, v.len())?;
    let r = slab_drive(p, &p.projections(v));
    let quad = 0.5 * v.iter().zip(&p.lambda).map(|(x, l)| l * x * x).sum::<f64>();
    Ok(configs(&p.shape, budget)?
        .iter()
        .map(|x| -free_energy_from_drive(p, x, &r, quad))
        .collect())
}

/// Exact posterior `P(f, g, h | v)`.
pub fn exact_posterior(v: &[f64], p: &ModelParams) -> Result<ConfigTable> {
    exact_posterior_with(v, p, EnumBudget::default())
}

pub fn exact_posterior_with(v: &[f64], p: &ModelParams, budget: EnumBudget) -> Result<ConfigTable> {
    let logw = posterior_log_weights(v, p, budget)?;
    Ok(ConfigTable::from_log_weights(p.shape, &logw))
}

/// `log p(v)` with the partition function computed exactly.
pub fn exact_log_likelihood(v: &[f64], p: &ModelParams) -> Result<f64> {
    let logw = posterior_log_weights(v, p, EnumBudget::default())?;
    Ok(log_sum_exp(&logw) - exact_log_z(p)?)
}

fn unit(on: &[bool]) -> Vec<f64> {
    on.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// Data term of the log-likelihood gradient:
/// `E_{P(f,g,h|v)} E_{p(s|v,f,g,h)} [-∂E/∂θ]`.
pub fn exact_positive_grad(v: &[f64], p: &ModelParams) -> Result<ParamGrad> {
    let table = exact_posterior(v, p)?;
    let shape = p.shape;
    let nt = shape.triples();
    let u = p.projections(v);
    let mut total = ParamGrad::zeros(shape);
    for (x, weight) in table.iter() {
        if weight == 0.0 {
            continue;
        }
        let mut g = ParamGrad::zeros(shape);
        for t in 0..nt {
            let (al, mu) = (p.alpha[t], p.mu[t]);
            let (es, es2) = if x.active(&shape, t) {
                let m = u[t] / al + mu;
                (m, m * m + 1.0 / al)
            } else {
                (0.0, 1.0 / al)
            };
            let a = if x.active(&shape, t) { 1.0 } else { 0.0 };
            for (dim, &vd) in v.iter().enumerate() {
                g.w[dim * nt + t] = vd * es * a;
            }
            g.mu[t] = a * al * (es - mu);
            g.alpha[t] = -0.5 * es2 + a * (mu * es - 0.5 * mu * mu);
        }
        for (dim, &vd) in v.iter().enumerate() {
            g.lambda[dim] = -0.5 * vd * vd;
        }
        set_bias_grads(&mut g, &unit(&x.f), &unit(&x.g), &unit(&x.h));
        total.add_scaled(&g, weight);
    }
    Ok(total)
}

/// Model term of the log-likelihood gradient: `E_{p(v,s,f,g,h)} [-∂E/∂θ]`,
/// with visible and slab moments taken analytically per configuration.
pub fn exact_negative_grad(p: &ModelParams) -> Result<ParamGrad> {
    let shape = p.shape;
    let nt = shape.triples();
    let d = shape.d;
    let logw = model_log_masses(p, EnumBudget::default())?;
    let table = ConfigTable::from_log_weights(shape, &logw);
    let parts: Vec<ParamGrad> = table
        .probs
        .par_iter()
        .enumerate()
        .map(|(idx, &weight)| -> Result<ParamGrad> {
            let x = SpikeConfig::from_index(&shape, idx as u64);
            let vm = visible_marginal(&x, p)?;
            let cov = vm.covariance();
            let m: &DVector<f64> = &vm.mean;
            let second = &cov + m * m.transpose();
            let mut g = ParamGrad::zeros(shape);
            for t in 0..nt {
                let (al, mu) = (p.alpha[t], p.mu[t]);
                if x.active(&shape, t) {
                    let col = DVector::from_vec(p.filter(t));
                    let s_col = &second * &col;
                    let u_mean = col.dot(m);
                    let u2 = col.dot(&s_col);
                    for dim in 0..d {
                        g.w[dim * nt + t] = s_col[dim] / al + m[dim] * mu;
                    }
                    let es = u_mean / al + mu;
                    let es2 = 1.0 / al + u2 / (al * al) + 2.0 * mu * u_mean / al + mu * mu;
                    g.mu[t] = al * (es - mu);
                    g.alpha[t] = -0.5 * es2 + mu * es - 0.5 * mu * mu;
                } else {
                    g.alpha[t] = -0.5 / al;
                }
            }
            for dim in 0..d {
                g.lambda[dim] = -0.5 * second[(dim, dim)];
            }
            set_bias_grads(&mut g, &unit(&x.f), &unit(&x.g), &unit(&x.h));
            g.scale(weight);
            Ok(g)
        })
        .collect::<Result<_>>()?;
    let mut total = ParamGrad::zeros(shape);
    for g in &parts {
        total.add_scaled(g, 1.0);
    }
    Ok(total)
}

/// Exact gradient of `log p(v)` with respect to every parameter.
pub fn exact_loglik_grad(v: &[f64], p: &ModelParams) -> Result<ParamGrad> {
    let pos = exact_positive_grad(v, p)?;
    let neg = exact_negative_grad(p)?;
    Ok(pos.minus(&neg))
}
