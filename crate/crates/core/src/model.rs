//! Energy function, slab-marginalized free energy, exact conditionals and
//! analytic energy gradients.
//!
//! The energy of a joint configuration is
//!
//! ```text
//! E(v,s,f,g,h) = 1/2 v'Λv - Σ e_k f_k + Σ c_ik g_ik + Σ d_jk h_jk + 1/2 Σ α_t s_t²
//!              + Σ_t (-v'W_t s_t - α_t μ_t s_t + 1/2 α_t μ_t²) f_k g_ik h_jk
//! ```
//!
//! Given the spikes every slab integrates independently. For an active triple
//! the integral contributes `exp(u_t μ_t + u_t² / (2 α_t))` with
//! `u_t = v'W_t`; we call that exponent the *slab drive* `r_t`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, Error, Result};
use crate::params::{BlockShape, LatentSample, ModelParams, ParamGrad, SpikeConfig};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sign convention for the `g`/`h` biases inside their conditionals.
///
/// `Energy` is what the energy function implies (`-c`, `-d`). `Displayed`
/// flips both to `+c`, `+d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BiasSign {
    #[default]
    Energy,
    Displayed,
}

impl BiasSign {
    #[inline]
    fn factor(self) -> f64 {
        match self {
            BiasSign::Energy => -1.0,
            BiasSign::Displayed => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
}

/// A multivariate Gaussian returned by the conditional operations.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub cov: Covariance,
}

impl GaussianSpec {
    /// Marginal variance of coordinate `i`.
    pub fn variance(&self, i: usize) -> f64 {
        match &self.cov {
            Covariance::Diagonal(d) => d[i],
            Covariance::Dense(m) => m[(i, i)],
        }
    }
}

fn check_visible(p: &ModelParams, v: &[f64]) -> Result<()> {
    check_len("v", p.shape.d, v.len())
}

/// Slab drive `r_t = u_t μ_t + u_t² / (2 α_t)` from filter responses.
pub(crate) fn slab_drive(p: &ModelParams, u: &[f64]) -> Vec<f64> {
    u.iter()
        .zip(&p.mu)
        .zip(&p.alpha)
        .map(|((&ut, &mu), &al)| ut * mu + ut * ut / (2.0 * al))
        .collect()
}

fn quad_visible(p: &ModelParams, v: &[f64]) -> f64 {
    0.5 * v.iter().zip(&p.lambda).map(|(x, l)| l * x * x).sum::<f64>()
}

/// `-Σ e f + Σ c g + Σ d h` for a binary configuration.
pub(crate) fn bias_energy(p: &ModelParams, x: &SpikeConfig) -> f64 {
    let pick = |bias: &[f64], on: &[bool]| -> f64 {
        bias.iter().zip(on).filter(|(_, &b)| b).map(|(v, _)| v).sum()
    };
    -pick(&p.f_bias, &x.f) + pick(&p.g_bias, &x.g) + pick(&p.h_bias, &x.h)
}

/// Energy `E(v, s, f, g, h)`.
pub fn energy(v: &[f64], x: &LatentSample, p: &ModelParams) -> Result<f64> {
    check_visible(p, v)?;
    x.check(&p.shape)?;
    let u = p.projections(v);
    let mut e = quad_visible(p, v) + bias_energy(p, &x.spikes);
    for t in 0..p.shape.triples() {
        let (s, al, mu) = (x.s[t], p.alpha[t], p.mu[t]);
        e += 0.5 * al * s * s;
        if x.spikes.active(&p.shape, t) {
            e += -u[t] * s - al * mu * s + 0.5 * al * mu * mu;
        }
    }
    Ok(e)
}

/// `Σ_t 1/2 log(2π / α_t)`: the slab integrals with every gate off.
pub(crate) fn slab_log_normalizer(p: &ModelParams) -> f64 {
    p.alpha.iter().map(|a| 0.5 * (LN_2PI - a.ln())).sum()
}

/// Free energy `F(v,f,g,h) = -log ∫ exp(-E) ds`.
pub fn free_energy(v: &[f64], x: &SpikeConfig, p: &ModelParams) -> Result<f64> {
    check_visible(p, v)?;
    x.check(&p.shape)?;
    p.check_alpha()?;
    let r = slab_drive(p, &p.projections(v));
    Ok(free_energy_from_drive(p, x, &r, quad_visible(p, v)))
}

pub(crate) fn free_energy_from_drive(
    p: &ModelParams,
    x: &SpikeConfig,
    r: &[f64],
    quad_v: f64,
) -> f64 {
    let gated: f64 = (0..p.shape.triples())
        .filter(|&t| x.active(&p.shape, t))
        .map(|t| r[t])
        .sum();
    quad_v + bias_energy(p, x) - slab_log_normalizer(p) - gated
}

/// `p(v | s, f, g, h)`: diagonal Gaussian with mean `Λ⁻¹ Σ W_t s_t a_t`.
pub fn cond_v_given_sfgh(x: &LatentSample, p: &ModelParams) -> Result<GaussianSpec> {
    x.check(&p.shape)?;
    let nt = p.shape.triples();
    let gated: Vec<f64> = (0..nt)
        .map(|t| if x.spikes.active(&p.shape, t) { x.s[t] } else { 0.0 })
        .collect();
    let mean = (0..p.shape.d)
        .map(|dim| {
            let row = &p.w[dim * nt..(dim + 1) * nt];
            row.iter().zip(&gated).map(|(w, s)| w * s).sum::<f64>() / p.lambda[dim]
        })
        .collect();
    let var = p.lambda.iter().map(|l| 1.0 / l).collect();
    Ok(GaussianSpec {
        mean,
        cov: Covariance::Diagonal(var),
    })
}

/// The slab-marginalized visible Gaussian for one spike configuration, kept in
/// factored form for reuse by the exact oracle.
pub(crate) struct VisibleMarginal {
    pub chol: Cholesky<f64, Dyn>,
    /// `b = Σ_active W_t μ_t`.
    pub b: DVector<f64>,
    pub mean: DVector<f64>,
    pub log_det_precision: f64,
}

impl VisibleMarginal {
    pub fn covariance(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

pub(crate) fn visible_marginal(x: &SpikeConfig, p: &ModelParams) -> Result<VisibleMarginal> {
    let shape = p.shape;
    let d = shape.d;
    let mut prec = DMatrix::<f64>::from_diagonal(&DVector::from_column_slice(&p.lambda));
    let mut b = DVector::<f64>::zeros(d);
    for t in (0..shape.triples()).filter(|&t| x.active(&shape, t)) {
        let col = DVector::from_vec(p.filter(t));
        prec.ger(-1.0 / p.alpha[t], &col, &col, 1.0);
        b.axpy(p.mu[t], &col, 1.0);
    }
    let chol = Cholesky::new(prec).ok_or_else(|| Error::NotPositiveDefinite {
        config: x.to_string(),
    })?;
    let log_det_precision = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    if !log_det_precision.is_finite() {
        return Err(Error::NotPositiveDefinite {
            config: x.to_string(),
        });
    }
    let mean = chol.solve(&b);
    Ok(VisibleMarginal {
        chol,
        b,
        mean,
        log_det_precision,
    })
}

/// `p(v | f, g, h)` with the slabs integrated out: precision
/// `Λ - Σ_active W_t W_t' / α_t`, mean `C Σ_active W_t μ_t`.
pub fn cond_v_given_fgh(x: &SpikeConfig, p: &ModelParams) -> Result<GaussianSpec> {
    x.check(&p.shape)?;
    p.check_alpha()?;
    let vm = visible_marginal(x, p)?;
    let cov = vm.covariance();
    // symmetrize away round-off from the triangular solves
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianSpec {
        mean: vm.mean.iter().copied().collect(),
        cov: Covariance::Dense(cov),
    })
}

/// `p(s | v, f, g, h)`: independent Gaussians, returned as one diagonal spec of
/// length `T`.
pub fn cond_s(v: &[f64], x: &SpikeConfig, p: &ModelParams) -> Result<GaussianSpec> {
    check_visible(p, v)?;
    x.check(&p.shape)?;
    let u = p.projections(v);
    let mean = (0..p.shape.triples())
        .map(|t| {
            if x.active(&p.shape, t) {
                u[t] / p.alpha[t] + p.mu[t]
            } else {
                0.0
            }
        })
        .collect();
    let var = p.alpha.iter().map(|a| 1.0 / a).collect();
    Ok(GaussianSpec {
        mean,
        cov: Covariance::Diagonal(var),
    })
}

fn as_unit(on: &[bool]) -> Vec<f64> {
    on.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// Logits of `f` given (possibly fractional) `g`, `h` activations.
pub(crate) fn f_logits(p: &ModelParams, r: &[f64], g: &[f64], h: &[f64]) -> Vec<f64> {
    let s = p.shape;
    let mut out = p.f_bias.clone();
    for i in 0..s.m {
        for j in 0..s.n {
            for k in 0..s.k {
                out[k] += g[s.g_index(i, k)] * h[s.h_index(j, k)] * r[s.triple(i, j, k)];
            }
        }
    }
    out
}

pub(crate) fn g_logits(
    p: &ModelParams,
    r: &[f64],
    f: &[f64],
    h: &[f64],
    sign: BiasSign,
) -> Vec<f64> {
    let s = p.shape;
    let mut out: Vec<f64> = p.g_bias.iter().map(|c| sign.factor() * c).collect();
    for i in 0..s.m {
        for j in 0..s.n {
            for k in 0..s.k {
                out[s.g_index(i, k)] += f[k] * h[s.h_index(j, k)] * r[s.triple(i, j, k)];
            }
        }
    }
    out
}

pub(crate) fn h_logits(
    p: &ModelParams,
    r: &[f64],
    f: &[f64],
    g: &[f64],
    sign: BiasSign,
) -> Vec<f64> {
    let s = p.shape;
    let mut out: Vec<f64> = p.h_bias.iter().map(|d| sign.factor() * d).collect();
    for i in 0..s.m {
        for j in 0..s.n {
            for k in 0..s.k {
                out[s.h_index(j, k)] += f[k] * g[s.g_index(i, k)] * r[s.triple(i, j, k)];
            }
        }
    }
    out
}

fn drive_for(p: &ModelParams, v: &[f64], x: &SpikeConfig) -> Result<Vec<f64>> {
    check_visible(p, v)?;
    x.check(&p.shape)?;
    Ok(slab_drive(p, &p.projections(v)))
}

/// `P(f_k = 1 | v, g, h)` for every block. The `f` entries of `x` are ignored.
pub fn cond_f(v: &[f64], x: &SpikeConfig, p: &ModelParams) -> Result<Vec<f64>> {
    let r = drive_for(p, v, x)?;
    let logits = f_logits(p, &r, &as_unit(&x.g), &as_unit(&x.h));
    Ok(logits.into_iter().map(sigmoid).collect())
}

/// `P(g_ik = 1 | v, f, h)`, `M x K`. The `g` entries of `x` are ignored.
pub fn cond_g(v: &[f64], x: &SpikeConfig, p: &ModelParams) -> Result<Vec<f64>> {
    let r = drive_for(p, v, x)?;
    let logits = g_logits(p, &r, &as_unit(&x.f), &as_unit(&x.h), BiasSign::Energy);
    Ok(logits.into_iter().map(sigmoid).collect())
}

/// `P(h_jk = 1 | v, f, g)`, `N x K`. The `h` entries of `x` are ignored.
pub fn cond_h(v: &[f64], x: &SpikeConfig, p: &ModelParams) -> Result<Vec<f64>> {
    let r = drive_for(p, v, x)?;
    let logits = h_logits(p, &r, &as_unit(&x.f), &as_unit(&x.g), BiasSign::Energy);
    Ok(logits.into_iter().map(sigmoid).collect())
}

/// `-∂E/∂θ` at `(v, x)` for every parameter tensor.
pub fn energy_grad(v: &[f64], x: &LatentSample, p: &ModelParams) -> Result<ParamGrad> {
    check_visible(p, v)?;
    x.check(&p.shape)?;
    let shape = p.shape;
    let nt = shape.triples();
    let mut grad = ParamGrad::zeros(shape);
    let gates = x.spikes.gates(&shape);
    for t in 0..nt {
        let (s, al, mu, a) = (x.s[t], p.alpha[t], p.mu[t], gates[t]);
        grad.mu[t] = a * al * (s - mu);
        grad.alpha[t] = -0.5 * s * s + a * (mu * s - 0.5 * mu * mu);
    }
    for (dim, &vd) in v.iter().enumerate() {
        let row = &mut grad.w[dim * nt..(dim + 1) * nt];
        for t in 0..nt {
            row[t] = vd * x.s[t] * gates[t];
        }
        grad.lambda[dim] = -0.5 * vd * vd;
    }
    set_bias_grads(&mut grad, &as_unit(&x.spikes.f), &as_unit(&x.spikes.g), &as_unit(&x.spikes.h));
    Ok(grad)
}

pub(crate) fn set_bias_grads(grad: &mut ParamGrad, f: &[f64], g: &[f64], h: &[f64]) {
    grad.f_bias.copy_from_slice(f);
    grad.g_bias.iter_mut().zip(g).for_each(|(o, x)| *o = -x);
    grad.h_bias.iter_mut().zip(h).for_each(|(o, x)| *o = -x);
}

/// Expectation of `-∂E/∂θ` over `p(s | v, f, g, h)` and a distribution over the
/// spikes described by its unit marginals and its per-triple gate
/// probabilities `q_t = P(f_k g_ik h_jk = 1)`.
///
/// Every statistic of the energy is linear in the gate indicators once the
/// slab moments are taken, so marginals suffice.
pub fn expected_grad_given_v(
    v: &[f64],
    p: &ModelParams,
    f: &[f64],
    g: &[f64],
    h: &[f64],
    gate_prob: &[f64],
) -> ParamGrad {
    let shape = p.shape;
    let nt = shape.triples();
    let u = p.projections(v);
    let mut grad = ParamGrad::zeros(shape);
    let mut ws = vec![0.0; nt];
    for t in 0..nt {
        let (al, mu, q) = (p.alpha[t], p.mu[t], gate_prob[t]);
        let m = u[t] / al + mu;
        ws[t] = q * m;
        grad.mu[t] = q * u[t];
        grad.alpha[t] = -0.5 * (1.0 / al + q * m * m) + q * (mu * m - 0.5 * mu * mu);
    }
    for (dim, &vd) in v.iter().enumerate() {
        let row = &mut grad.w[dim * nt..(dim + 1) * nt];
        row.iter_mut().zip(&ws).for_each(|(o, s)| *o = vd * s);
        grad.lambda[dim] = -0.5 * vd * vd;
    }
    set_bias_grads(&mut grad, f, g, h);
    grad
}

/// Per-triple gate product `f_k g_ik h_jk` for fractional marginals.
pub fn gate_products(shape: &BlockShape, f: &[f64], g: &[f64], h: &[f64]) -> Vec<f64> {
    (0..shape.triples())
        .map(|t| {
            let (i, j, k) = shape.triple_coords(t);
            f[k] * g[shape.g_index(i, k)] * h[shape.h_index(j, k)]
        })
        .collect()
}
