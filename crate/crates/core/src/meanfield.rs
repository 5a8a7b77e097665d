//! Factorial mean-field inference over the spike units.
//!
//! Updates run in three stages per sweep: every `f̂` in parallel, then every
//! `ĝ`, then every `ĥ`. No unit depends on a same-stage peer, so each stage is
//! an exact block-coordinate maximizer of the variational bound.

use crate::error::{Error, Result};
use crate::model::{f_logits, g_logits, gate_products, h_logits, sigmoid, slab_drive, BiasSign};
use crate::params::{BlockShape, ModelParams};

/// Largest `1 + M + N` for which [`mf_objective`] enumerates a block.
pub const MAX_BLOCK_ENUMERATION: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MfInit {
    UniformHalf,
    #[default]
    BiasSigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MfConfig {
    /// Stop once the largest absolute marginal change in a sweep is below this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// `new = (1 - damping) * update + damping * old`.
    pub damping: f64,
    pub init: MfInit,
    pub bias_sign: BiasSign,
    /// Hold every `f̂_k` at 1.
    pub clamp_f: bool,
}

impl Default for MfConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_sweeps: 50,
            damping: 0.2,
            init: MfInit::BiasSigmoid,
            bias_sign: BiasSign::Energy,
            clamp_f: false,
        }
    }
}

impl MfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("mf tol {} must be > 0", self.tol)));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidConfig(format!(
                "mf damping {} must lie in [0, 1)",
                self.damping
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    pub f_hat: Vec<f64>,
    pub g_hat: Vec<f64>,
    pub h_hat: Vec<f64>,
    /// Expected gated slabs `(u_t / α_t + μ_t) f̂ ĝ ĥ`.
    pub s_hat: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// Variational bound up to `-log Z`.
    pub objective: f64,
}

impl MeanFieldState {
    /// A state with the given marginals; derived fields are left empty.
    pub fn from_marginals(f_hat: Vec<f64>, g_hat: Vec<f64>, h_hat: Vec<f64>) -> Self {
        Self {
            f_hat,
            g_hat,
            h_hat,
            s_hat: Vec::new(),
            sweeps: 0,
            converged: false,
            objective: 0.0,
        }
    }

    pub fn gate_probs(&self, shape: &BlockShape) -> Vec<f64> {
        gate_products(shape, &self.f_hat, &self.g_hat, &self.h_hat)
    }

    /// Mean-field reconstruction `Λ⁻¹ Σ_t W_t ŝ_t`.
    pub fn reconstruction(&self, p: &ModelParams) -> Vec<f64> {
        let nt = p.shape.triples();
        (0..p.shape.d)
            .map(|dim| {
                let row = &p.w[dim * nt..(dim + 1) * nt];
                row.iter().zip(&self.s_hat).map(|(w, s)| w * s).sum::<f64>() / p.lambda[dim]
            })
            .collect()
    }
}

fn init_marginals(p: &ModelParams, cfg: &MfConfig) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let sign = match cfg.bias_sign {
        BiasSign::Energy => -1.0,
        BiasSign::Displayed => 1.0,
    };
    let (mut f, g, h) = match cfg.init {
        MfInit::UniformHalf => (
            vec![0.5; p.f_bias.len()],
            vec![0.5; p.g_bias.len()],
            vec![0.5; p.h_bias.len()],
        ),
        MfInit::BiasSigmoid => (
            p.f_bias.iter().map(|&e| sigmoid(e)).collect(),
            p.g_bias.iter().map(|&c| sigmoid(sign * c)).collect(),
            p.h_bias.iter().map(|&d| sigmoid(sign * d)).collect(),
        ),
    };
    if cfg.clamp_f {
        f.iter_mut().for_each(|x| *x = 1.0);
    }
    (f, g, h)
}

/// Replace `old` by the damped sigmoid of `logits`; returns the largest change.
fn damped_update(old: &mut [f64], logits: &[f64], damping: f64) -> f64 {
    let mut change: f64 = 0.0;
    for (o, &l) in old.iter_mut().zip(logits) {
        let new = (1.0 - damping) * sigmoid(l) + damping * *o;
        change = change.max((new - *o).abs());
        *o = new;
    }
    change
}

/// Which stage a single [`mf_stage`] call updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    F,
    G,
    H,
}

/// Apply one stage update in place. Returns the largest marginal change.
pub fn mf_stage(
    v: &[f64],
    p: &ModelParams,
    q: &mut MeanFieldState,
    stage: Stage,
    cfg: &MfConfig,
) -> Result<f64> {
    crate::error::check_len("v", p.shape.d, v.len())?;
    let r = slab_drive(p, &p.projections(v));
    Ok(stage_with_drive(p, &r, q, stage, cfg))
}

fn stage_with_drive(
    p: &ModelParams,
    r: &[f64],
    q: &mut MeanFieldState,
    stage: Stage,
    cfg: &MfConfig,
) -> f64 {
    match stage {
        Stage::F if cfg.clamp_f => 0.0,
        Stage::F => {
            let l = f_logits(p, r, &q.g_hat, &q.h_hat);
            damped_update(&mut q.f_hat, &l, cfg.damping)
        }
        Stage::G => {
            let l = g_logits(p, r, &q.f_hat, &q.h_hat, cfg.bias_sign);
            damped_update(&mut q.g_hat, &l, cfg.damping)
        }
        Stage::H => {
            let l = h_logits(p, r, &q.f_hat, &q.g_hat, cfg.bias_sign);
            damped_update(&mut q.h_hat, &l, cfg.damping)
        }
    }
}

/// Run damped three-stage fixed-point iterations from the configured init.
pub fn mf_infer(v: &[f64], p: &ModelParams, cfg: &MfConfig) -> Result<MeanFieldState> {
    let (f, g, h) = init_marginals(p, cfg);
    mf_infer_from(v, p, cfg, MeanFieldState::from_marginals(f, g, h))
}

/// Run the fixed-point iterations starting from the marginals in `start`.
pub fn mf_infer_from(
    v: &[f64],
    p: &ModelParams,
    cfg: &MfConfig,
    start: MeanFieldState,
) -> Result<MeanFieldState> {
    cfg.validate()?;
    crate::error::check_len("v", p.shape.d, v.len())?;
    let u = p.projections(v);
    let r = slab_drive(p, &u);
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            stage: "slab drive",
            sweep: 0,
        });
    }
    let mut q = start;
    if cfg.clamp_f {
        q.f_hat.iter_mut().for_each(|x| *x = 1.0);
    }
    q.converged = false;
    q.sweeps = 0;
    for sweep in 1..=cfg.max_sweeps {
        let mut change: f64 = 0.0;
        for (stage, name) in [(Stage::F, "f"), (Stage::G, "g"), (Stage::H, "h")] {
            change = change.max(stage_with_drive(p, &r, &mut q, stage, cfg));
            let vals = match stage {
                Stage::F => &q.f_hat,
                Stage::G => &q.g_hat,
                Stage::H => &q.h_hat,
            };
            if vals.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { stage: name, sweep });
            }
        }
        q.sweeps = sweep;
        if change < cfg.tol {
            q.converged = true;
            break;
        }
    }
    let gates = q.gate_probs(&p.shape);
    q.s_hat = (0..p.shape.triples())
        .map(|t| (u[t] / p.alpha[t] + p.mu[t]) * gates[t])
        .collect();
    q.objective = objective_closed_form(v, p, &q, &r);
    if !q.objective.is_finite() {
        return Err(Error::NonFinite {
            stage: "objective",
            sweep: q.sweeps,
        });
    }
    Ok(q)
}

fn bernoulli_entropy(q: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    term(q) + term(1.0 - q)
}

fn entropy(q: &MeanFieldState) -> f64 {
    q.f_hat
        .iter()
        .chain(&q.g_hat)
        .chain(&q.h_hat)
        .map(|&x| bernoulli_entropy(x))
        .sum()
}

/// Terms of `-F` that do not depend on the spikes.
fn constant_part(v: &[f64], p: &ModelParams) -> f64 {
    let quad = 0.5 * v.iter().zip(&p.lambda).map(|(x, l)| l * x * x).sum::<f64>();
    crate::model::slab_log_normalizer(p) - quad
}

/// `E_Q[-F] + H(Q)` using multilinearity of `F` in the spikes.
fn objective_closed_form(v: &[f64], p: &ModelParams, q: &MeanFieldState, r: &[f64]) -> f64 {
    let gates = q.gate_probs(&p.shape);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    constant_part(v, p) + dot(&p.f_bias, &q.f_hat) - dot(&p.g_bias, &q.g_hat)
        - dot(&p.h_bias, &q.h_hat)
        + dot(&gates, r)
        + entropy(q)
}

/// Variational bound `Σ Q(f)Q(g)Q(h) (-F(v,f,g,h)) + H(Q)`, up to `-log Z`.
///
/// The expectation is computed block by block, enumerating the
/// `2^(1+M+N)` configurations of each block under the factorial `Q`.
pub fn mf_objective(v: &[f64], q: &MeanFieldState, p: &ModelParams) -> Result<f64> {
    let s = p.shape;
    crate::error::check_len("v", s.d, v.len())?;
    crate::error::check_len("f_hat", s.k, q.f_hat.len())?;
    crate::error::check_len("g_hat", s.m * s.k, q.g_hat.len())?;
    crate::error::check_len("h_hat", s.n * s.k, q.h_hat.len())?;
    let units = 1 + s.m + s.n;
    if units > MAX_BLOCK_ENUMERATION {
        return Err(Error::BudgetExceeded {
            needed: units,
            budget: MAX_BLOCK_ENUMERATION,
        });
    }
    p.check_alpha()?;
    let r = slab_drive(p, &p.projections(v));
    let mut total = constant_part(v, p);
    for k in 0..s.k {
        let mut block = 0.0;
        for bits in 0u64..(1u64 << units) {
            let on = |b: usize| (bits >> b) & 1 == 1;
            let prob = |b: usize, marginal: f64| if on(b) { marginal } else { 1.0 - marginal };
            let mut weight = prob(0, q.f_hat[k]);
            let mut neg_f = if on(0) { p.f_bias[k] } else { 0.0 };
            for i in 0..s.m {
                weight *= prob(1 + i, q.g_hat[s.g_index(i, k)]);
                if on(1 + i) {
                    neg_f -= p.g_bias[s.g_index(i, k)];
                }
            }
            for j in 0..s.n {
                weight *= prob(1 + s.m + j, q.h_hat[s.h_index(j, k)]);
                if on(1 + s.m + j) {
                    neg_f -= p.h_bias[s.h_index(j, k)];
                }
            }
            if weight == 0.0 {
                continue;
            }
            if on(0) {
                for i in (0..s.m).filter(|&i| on(1 + i)) {
                    for j in (0..s.n).filter(|&j| on(1 + s.m + j)) {
                        neg_f += r[s.triple(i, j, k)];
                    }
                }
            }
            block += weight * neg_f;
        }
        total += block;
    }
    Ok(total + entropy(q))
}
