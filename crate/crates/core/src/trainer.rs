//! Stochastic maximum likelihood training.
//!
//! The positive phase is the mean-field expectation of `-∂E/∂θ` on a
//! minibatch; the negative phase averages `-∂E/∂θ` over persistent Gibbs
//! chains. Every update is followed by the feasibility projections.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::gibbs::{advance_chains, init_chains, ChainInit, ChainState, GibbsConfig};
use crate::meanfield::{mf_infer, MeanFieldState, MfConfig};
use crate::model::{energy_grad, expected_grad_given_v};
use crate::params::{BlockShape, ModelParams, ParamGrad};

const SHUFFLE_SALT: u64 = 0x5348_5546_464c_4531;
const INIT_SALT: u64 = 0x494e_4954_5741_4954;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativePhase {
    /// Chains persist across updates.
    #[default]
    Persistent,
    /// Chains restart from the minibatch and run `k` sweeps per update.
    ContrastiveDivergence { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    /// Standard deviation of the raw filter entries before normalization.
    pub w_std: f64,
    pub mu: f64,
    pub alpha: f64,
    pub f_bias: f64,
    pub g_bias: f64,
    pub h_bias: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            w_std: 0.01,
            mu: 1.0,
            alpha: 10.0,
            f_bias: -1.0,
            g_bias: 0.0,
            h_bias: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    /// Multiplicative learning-rate decay applied once per epoch.
    pub lr_decay: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub mf: MfConfig,
    pub gibbs: GibbsConfig,
    pub mu_min: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub lambda_min: f64,
    pub learn_lambda: bool,
    pub seed: u64,
    /// Subtract the per-dimension data mean before training.
    pub center_data: bool,
    /// Hold every `f_k` at 1 in inference and sampling.
    pub clamp_f: bool,
    pub negative_phase: NegativePhase,
    pub init: InitConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            lr_decay: 1.0,
            epochs: 10,
            minibatch: 32,
            mf: MfConfig::default(),
            gibbs: GibbsConfig::default(),
            mu_min: 1.0,
            alpha_min: 0.1,
            alpha_max: 100.0,
            lambda_min: 0.01,
            learn_lambda: false,
            seed: 0,
            center_data: true,
            clamp_f: false,
            negative_phase: NegativePhase::Persistent,
            init: InitConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.lr > 0.0) {
            return bad(format!("lr {} must be > 0", self.lr));
        }
        if !(self.lr_decay > 0.0) {
            return bad(format!("lr_decay {} must be > 0", self.lr_decay));
        }
        if self.minibatch == 0 {
            return bad("minibatch must be >= 1".into());
        }
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha_max) {
            return bad(format!(
                "alpha bounds [{}, {}] must satisfy 0 < min <= max",
                self.alpha_min, self.alpha_max
            ));
        }
        if !(self.lambda_min > 0.0) {
            return bad(format!("lambda_min {} must be > 0", self.lambda_min));
        }
        if !self.mu_min.is_finite() {
            return bad("mu_min must be finite".into());
        }
        if self.gibbs.n_chains == 0 {
            return bad("n_chains must be >= 1".into());
        }
        self.mf.validate()
    }

    /// Mean-field settings with the trainer's `clamp_f` applied.
    pub fn mf_config(&self) -> MfConfig {
        MfConfig {
            clamp_f: self.clamp_f,
            ..self.mf
        }
    }

    pub fn gibbs_config(&self) -> GibbsConfig {
        GibbsConfig {
            clamp_f: self.clamp_f,
            ..self.gibbs
        }
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay.powi(epoch as i32)
    }
}

/// Shape and settings for the color/position toy data: one block of
/// `3 x 5` units with `f` held on, trained on uncentered pixels.
pub fn toy_preset() -> (BlockShape, TrainConfig) {
    let shape = BlockShape::new(crate::toydata::TOY_DIM, 1, 3, 5).expect("toy shape");
    let cfg = TrainConfig {
        lr: 1e-2,
        lr_decay: 0.93,
        epochs: 30,
        minibatch: 100,
        center_data: false,
        clamp_f: true,
        alpha_min: 1.0,
        mf: MfConfig {
            damping: 0.0,
            ..MfConfig::default()
        },
        init: InitConfig {
            mu: 3.0,
            alpha: 2.0,
            g_bias: 2.0,
            h_bias: 2.0,
            ..InitConfig::default()
        },
        ..TrainConfig::default()
    };
    (shape, cfg)
}

/// Row-major data with `dim` columns.
#[derive(Debug, Clone, Copy)]
pub struct Rows<'a> {
    pub data: &'a [f64],
    pub dim: usize,
}

impl<'a> Rows<'a> {
    pub fn new(data: &'a [f64], dim: usize) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidConfig(format!(
                "data length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { data, dim })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &'a [f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for row in self.iter() {
            m.iter_mut().zip(row).for_each(|(a, x)| *a += x);
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    pub fn variance(&self) -> Vec<f64> {
        let mean = self.mean();
        let mut var = vec![0.0; self.dim];
        for row in self.iter() {
            for ((acc, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *acc += (x - m) * (x - m);
            }
        }
        let n = self.len().max(1) as f64;
        var.iter_mut().for_each(|a| *a /= n);
        var
    }
}

/// Initial parameters: normalized small random filters, constant slab
/// parameters and `Λ = 1 / var(data)`.
pub fn init_params(shape: BlockShape, data: Rows<'_>, cfg: &TrainConfig) -> Result<ModelParams> {
    check_len("data dim", shape.d, data.dim)?;
    let mut p = ModelParams::new(shape);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ INIT_SALT);
    let normal = Normal::new(0.0, cfg.init.w_std)
        .map_err(|e| Error::InvalidConfig(format!("init w_std: {e}")))?;
    p.w.iter_mut().for_each(|w| *w = normal.sample(&mut rng));
    normalize_filters(&mut p);
    p.mu.iter_mut().for_each(|m| *m = cfg.init.mu.max(cfg.mu_min));
    p.alpha
        .iter_mut()
        .for_each(|a| *a = cfg.init.alpha.clamp(cfg.alpha_min, cfg.alpha_max));
    let var = data.variance();
    for (l, v) in p.lambda.iter_mut().zip(var) {
        *l = if v > 0.0 { (1.0 / v).max(cfg.lambda_min) } else { 1.0 };
    }
    p.f_bias.iter_mut().for_each(|e| *e = cfg.init.f_bias);
    p.g_bias.iter_mut().for_each(|c| *c = cfg.init.g_bias);
    p.h_bias.iter_mut().for_each(|d| *d = cfg.init.h_bias);
    Ok(p)
}

fn normalize_filters(p: &mut ModelParams) {
    let nt = p.shape.triples();
    for t in 0..nt {
        let norm = p.filter_norm(t);
        if norm > 0.0 {
            for dim in 0..p.shape.d {
                p.w[dim * nt + t] /= norm;
            }
        } else {
            p.w[t] = 1.0;
        }
    }
}

/// Feasibility projections in fixed order: unit-norm filters, then the
/// `μ`, `α` and `Λ` clamps.
pub fn project(p: &mut ModelParams, cfg: &TrainConfig) {
    normalize_filters(p);
    p.mu.iter_mut().for_each(|m| *m = m.max(cfg.mu_min));
    p.alpha
        .iter_mut()
        .for_each(|a| *a = a.clamp(cfg.alpha_min, cfg.alpha_max));
    p.lambda.iter_mut().for_each(|l| *l = l.max(cfg.lambda_min));
}

/// Describe the first violated feasibility constraint, if any.
pub fn constraint_violation(p: &ModelParams, cfg: &TrainConfig) -> Option<String> {
    for t in 0..p.shape.triples() {
        let norm = p.filter_norm(t);
        if (norm - 1.0).abs() > 1e-6 {
            return Some(format!("filter {t} has norm {norm}"));
        }
        if !(p.mu[t] >= cfg.mu_min) {
            return Some(format!("mu[{t}] = {} below {}", p.mu[t], cfg.mu_min));
        }
        if !(p.alpha[t] >= cfg.alpha_min && p.alpha[t] <= cfg.alpha_max) {
            return Some(format!("alpha[{t}] = {} outside bounds", p.alpha[t]));
        }
    }
    p.lambda
        .iter()
        .enumerate()
        .find(|(_, &l)| !(l >= cfg.lambda_min))
        .map(|(d, l)| format!("lambda[{d}] = {l} below {}", cfg.lambda_min))
}

/// Positive phase: mean-field inference per example and the analytic
/// expectation of `-∂E/∂θ`, averaged over the batch. Also returns the
/// per-example mean-field states.
pub fn positive_phase(
    batch: &[&[f64]],
    p: &ModelParams,
    mf: &MfConfig,
) -> Result<(ParamGrad, Vec<MeanFieldState>)> {
    if batch.is_empty() {
        return Err(Error::InvalidConfig("positive phase needs a nonempty batch".into()));
    }
    let parts: Vec<(ParamGrad, MeanFieldState)> = batch
        .par_iter()
        .map(|v| -> Result<_> {
            let q = mf_infer(v, p, mf)?;
            let gates = q.gate_probs(&p.shape);
            let g = expected_grad_given_v(v, p, &q.f_hat, &q.g_hat, &q.h_hat, &gates);
            Ok((g, q))
        })
        .collect::<Result<_>>()?;
    let mut total = ParamGrad::zeros(p.shape);
    let mut states = Vec::with_capacity(parts.len());
    for (g, q) in parts {
        total.add_scaled(&g, 1.0);
        states.push(q);
    }
    total.scale(1.0 / batch.len() as f64);
    Ok((total, states))
}

pub fn positive_stats(batch: &[&[f64]], p: &ModelParams, mf: &MfConfig) -> Result<ParamGrad> {
    positive_phase(batch, p, mf).map(|(g, _)| g)
}

/// Negative phase: `-∂E/∂θ` averaged over chain states.
pub fn negative_stats(chains: &[ChainState], p: &ModelParams) -> Result<ParamGrad> {
    if chains.is_empty() {
        return Err(Error::InvalidConfig("negative phase needs at least one chain".into()));
    }
    let parts: Vec<ParamGrad> = chains
        .par_iter()
        .map(|c| energy_grad(&c.v, &c.x, p))
        .collect::<Result<_>>()?;
    let mut total = ParamGrad::zeros(p.shape);
    for g in &parts {
        total.add_scaled(g, 1.0);
    }
    total.scale(1.0 / chains.len() as f64);
    Ok(total)
}

/// Gradient-ascent step `p + lr * grad` followed by [`project`].
pub fn apply_update(
    p: &ModelParams,
    grad: &ParamGrad,
    cfg: &TrainConfig,
    lr: f64,
) -> Result<ModelParams> {
    if let Some(name) = grad.first_non_finite() {
        return Err(Error::NonFiniteGradient(name));
    }
    let mut next = p.clone();
    let learn = [true, true, true, cfg.learn_lambda, true, true, !cfg.clamp_f];
    for ((dst, src), on) in next.tensors_mut().into_iter().zip(grad.tensors()).zip(learn) {
        if on {
            dst.iter_mut().zip(src).for_each(|(a, g)| *a += lr * g);
        }
    }
    project(&mut next, cfg);
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    /// Mean squared mean-field reconstruction error per visible unit.
    pub recon_mse: f64,
    pub mf_mean_sweeps: f64,
    pub mf_converged_frac: f64,
    /// Mean norm of the applied gradient over the epoch's updates.
    pub grad_norm: f64,
    pub lr: f64,
    pub w_norm: f64,
    pub mu_mean: f64,
    pub alpha_mean: f64,
}

pub const EPOCH_LOG_HEADER: &str = "epoch,recon_mse,mf_mean_sweeps,grad_norm,lr";

impl EpochLog {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.epoch, self.recon_mse, self.mf_mean_sweeps, self.grad_norm, self.lr
        )
    }
}

/// Resumable training state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub cfg: TrainConfig,
    pub params: ModelParams,
    pub chains: Vec<ChainState>,
    pub centering: Vec<f64>,
    /// Completed epochs.
    pub epoch: usize,
    /// Updates applied so far.
    pub updates: usize,
    pub log: Vec<EpochLog>,
}

impl Trainer {
    pub fn new(shape: BlockShape, data: Rows<'_>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        check_len("data dim", shape.d, data.dim)?;
        if data.is_empty() {
            return Err(Error::InvalidConfig("training data is empty".into()));
        }
        let centering = if cfg.center_data {
            data.mean()
        } else {
            vec![0.0; shape.d]
        };
        let centered = center(data, &centering);
        let rows = Rows::new(&centered, shape.d)?;
        let params = init_params(shape, rows, &cfg)?;
        let chains = init_chains(
            &params,
            &cfg.gibbs_config(),
            ChainInit::Data {
                rows: &centered,
                dim: shape.d,
            },
        )?;
        Ok(Self {
            cfg,
            params,
            chains,
            centering,
            epoch: 0,
            updates: 0,
            log: Vec::new(),
        })
    }

    /// Continue from saved parameters, chains and progress counters.
    pub fn resume(
        cfg: TrainConfig,
        params: ModelParams,
        chains: Vec<ChainState>,
        centering: Vec<f64>,
        epoch: usize,
        updates: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        params.validate()?;
        check_len("centering", params.shape.d, centering.len())?;
        if chains.is_empty() {
            return Err(Error::InvalidConfig("resume needs chain states".into()));
        }
        Ok(Self {
            cfg,
            params,
            chains,
            centering,
            epoch,
            updates,
            log: Vec::new(),
        })
    }

    /// Run one epoch of minibatch updates over `data` (uncentered).
    pub fn run_epoch(&mut self, data: Rows<'_>) -> Result<EpochLog> {
        let shape = self.params.shape;
        check_len("data dim", shape.d, data.dim)?;
        let centered = center(data, &self.centering);
        let rows = Rows::new(&centered, shape.d)?;
        let n = rows.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ SHUFFLE_SALT);
        rng.set_stream(self.epoch as u64);
        order.shuffle(&mut rng);

        let lr = self.cfg.lr_at(self.epoch);
        let mf = self.cfg.mf_config();
        let gibbs = self.cfg.gibbs_config();
        let (mut sq_err, mut sweeps, mut converged, mut grad_norm, mut batches) =
            (0.0, 0usize, 0usize, 0.0, 0usize);

        for idx in order.chunks(self.cfg.minibatch) {
            let batch: Vec<&[f64]> = idx.iter().map(|&i| rows.row(i)).collect();
            let (pos, states) = positive_phase(&batch, &self.params, &mf)?;
            for (v, q) in batch.iter().zip(&states) {
                let rec = q.reconstruction(&self.params);
                sq_err += v.iter().zip(&rec).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                sweeps += q.sweeps;
                converged += q.converged as usize;
            }

            match self.cfg.negative_phase {
                NegativePhase::Persistent => {
                    advance_chains(&mut self.chains, &self.params, &gibbs, gibbs.steps_per_update)?
                }
                NegativePhase::ContrastiveDivergence { k } => {
                    for (c, chain) in self.chains.iter_mut().enumerate() {
                        chain.v.copy_from_slice(batch[c % batch.len()]);
                    }
                    advance_chains(&mut self.chains, &self.params, &gibbs, k)?
                }
            }
            let neg = negative_stats(&self.chains, &self.params)?;
            let grad = pos.minus(&neg);
            grad_norm += grad.norm();
            self.params = apply_update(&self.params, &grad, &self.cfg, lr)?;
            self.updates += 1;
            batches += 1;
            if let Some(detail) = constraint_violation(&self.params, &self.cfg) {
                return Err(Error::ConstraintViolation {
                    update: self.updates,
                    detail,
                });
            }
        }

        self.epoch += 1;
        let nt = shape.triples() as f64;
        let entry = EpochLog {
            epoch: self.epoch,
            recon_mse: sq_err / (n * shape.d) as f64,
            mf_mean_sweeps: sweeps as f64 / n as f64,
            mf_converged_frac: converged as f64 / n as f64,
            grad_norm: grad_norm / batches as f64,
            lr,
            w_norm: self.params.w.iter().map(|w| w * w).sum::<f64>().sqrt(),
            mu_mean: self.params.mu.iter().sum::<f64>() / nt,
            alpha_mean: self.params.alpha.iter().sum::<f64>() / nt,
        };
        self.log.push(entry.clone());
        Ok(entry)
    }

    /// Run the remaining configured epochs.
    pub fn run(&mut self, data: Rows<'_>) -> Result<()> {
        while self.epoch < self.cfg.epochs {
            self.run_epoch(data)?;
        }
        Ok(())
    }
}

/// Subtract `centering` from every row.
pub fn center(data: Rows<'_>, centering: &[f64]) -> Vec<f64> {
    data.iter()
        .flat_map(|row| row.iter().zip(centering).map(|(x, m)| x - m))
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<EpochLog>,
    pub chains: Vec<ChainState>,
    pub centering: Vec<f64>,
    pub updates: usize,
}

/// Train from scratch for `cfg.epochs` epochs.
pub fn train(shape: BlockShape, data: Rows<'_>, cfg: TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(shape, data, cfg)?;
    trainer.run(data)?;
    Ok(TrainOutcome {
        params: trainer.params,
        log: trainer.log,
        chains: trainer.chains,
        centering: trainer.centering,
        updates: trainer.updates,
    })
}

/// Mean squared mean-field reconstruction error per visible unit.
pub fn reconstruction_mse(
    data: Rows<'_>,
    p: &ModelParams,
    centering: &[f64],
    mf: &MfConfig,
) -> Result<f64> {
    check_len("data dim", p.shape.d, data.dim)?;
    let centered = center(data, centering);
    let errs: Vec<f64> = centered
        .par_chunks(data.dim)
        .map(|v| -> Result<f64> {
            let q = mf_infer(v, p, mf)?;
            let rec = q.reconstruction(p);
            Ok(v.iter().zip(&rec).map(|(a, b)| (a - b) * (a - b)).sum())
        })
        .collect::<Result<_>>()?;
    Ok(errs.iter().sum::<f64>() / (data.data.len().max(1)) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feasible() -> (ModelParams, TrainConfig) {
        let shape = BlockShape::new(3, 1, 2, 2).unwrap();
        let data: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64 / 5.0).collect();
        let cfg = TrainConfig::default();
        let p = init_params(shape, Rows::new(&data, 3).unwrap(), &cfg).unwrap();
        (p, cfg)
    }

    #[test]
    fn zero_gradient_keeps_feasible_point() {
        let (p, cfg) = feasible();
        let next = apply_update(&p, &ParamGrad::zeros(p.shape), &cfg, 0.1).unwrap();
        for (a, b) in next.w.iter().zip(&p.w) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(next.mu, p.mu);
        assert_eq!(next.alpha, p.alpha);
        assert_eq!(next.lambda, p.lambda);
    }

    #[test]
    fn filter_renormalized_direction_kept() {
        let (p, cfg) = feasible();
        let mut grad = ParamGrad::zeros(p.shape);
        let nt = p.shape.triples();
        let col = p.filter(1);
        for dim in 0..3 {
            grad.w[dim * nt + 1] = 2.0 * col[dim];
        }
        let next = apply_update(&p, &grad, &cfg, 1.0).unwrap();
        assert!((next.filter_norm(1) - 1.0).abs() < 1e-12);
        for (a, b) in next.filter(1).iter().zip(&col) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mu_is_clamped_to_floor() {
        let (p, cfg) = feasible();
        let mut grad = ParamGrad::zeros(p.shape);
        grad.mu[0] = -0.5;
        let next = apply_update(&p, &grad, &cfg, 1.0).unwrap();
        assert_eq!(next.mu[0], 1.0);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let (p, cfg) = feasible();
        let mut grad = ParamGrad::zeros(p.shape);
        grad.alpha[2] = f64::NAN;
        assert!(matches!(
            apply_update(&p, &grad, &cfg, 1.0),
            Err(Error::NonFiniteGradient("alpha"))
        ));
    }

    #[test]
    fn lambda_frozen_unless_learned() {
        let (p, mut cfg) = feasible();
        let mut grad = ParamGrad::zeros(p.shape);
        grad.lambda = vec![1.0; 3];
        let next = apply_update(&p, &grad, &cfg, 0.5).unwrap();
        assert_eq!(next.lambda, p.lambda);
        cfg.learn_lambda = true;
        let next = apply_update(&p, &grad, &cfg, 0.5).unwrap();
        assert!((next.lambda[0] - p.lambda[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let shape = BlockShape::new(3, 1, 2, 2).unwrap();
        let data: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let rows = Rows::new(&data, 3).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let out = train(shape, rows, cfg).unwrap();
        let centered = center(rows, &rows.mean());
        let init = init_params(shape, Rows::new(&centered, 3).unwrap(), &cfg).unwrap();
        assert_eq!(out.params, init);
        assert!(out.log.is_empty());
    }

    #[test]
    fn log_has_one_row_per_epoch_and_decaying_lr() {
        let shape = BlockShape::new(3, 1, 2, 2).unwrap();
        let data: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin()).collect();
        let cfg = TrainConfig {
            epochs: 4,
            lr_decay: 0.5,
            minibatch: 5,
            gibbs: GibbsConfig {
                n_chains: 4,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = train(shape, Rows::new(&data, 3).unwrap(), cfg).unwrap();
        assert_eq!(out.log.len(), 4);
        assert!(out.log.windows(2).all(|w| w[1].lr < w[0].lr));
        assert_eq!(out.updates, 4 * 4);
    }

    #[test]
    fn rejects_bad_bounds() {
        let cfg = TrainConfig {
            alpha_min: 5.0,
            alpha_max: 1.0,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }
}
