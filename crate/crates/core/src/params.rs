//! Parameter tensors, latent configurations and gradient accumulators.
//!
//! Every tensor is stored dense and row-major in the canonical axis order
//! (visible dimension, then `i`, then `j`, then `k`). A slab triple
//! `(i, j, k)` is addressed by the flat index `t = (i * N + j) * K + k`, so
//! the filter tensor is a `D x (M*N*K)` matrix with one column per triple.

use crate::error::{check_len, Error, Result};

/// Sizes of the visible layer and of the latent block structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockShape {
    /// Visible dimension.
    pub d: usize,
    /// Number of blocks (one `f` unit per block).
    pub k: usize,
    /// `g` units per block.
    pub m: usize,
    /// `h` units per block.
    pub n: usize,
}

impl BlockShape {
    pub fn new(d: usize, k: usize, m: usize, n: usize) -> Result<Self> {
        if d == 0 || k == 0 || m == 0 || n == 0 {
            return Err(Error::InvalidShape(format!(
                "D={d} K={k} M={m} N={n}; all must be >= 1"
            )));
        }
        Ok(Self { d, k, m, n })
    }

    /// Number of slab variables, `M * N * K`.
    #[inline]
    pub fn triples(&self) -> usize {
        self.m * self.n * self.k
    }

    #[inline]
    pub fn triple(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.k + k
    }

    /// Inverse of [`BlockShape::triple`].
    #[inline]
    pub fn triple_coords(&self, t: usize) -> (usize, usize, usize) {
        let k = t % self.k;
        let ij = t / self.k;
        (ij / self.n, ij % self.n, k)
    }

    #[inline]
    pub fn g_index(&self, i: usize, k: usize) -> usize {
        i * self.k + k
    }

    #[inline]
    pub fn h_index(&self, j: usize, k: usize) -> usize {
        j * self.k + k
    }

    /// Total count of binary latent units, `K + M*K + N*K`.
    pub fn binary_units(&self) -> usize {
        self.k + self.m * self.k + self.n * self.k
    }
}

/// All learnable tensors of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub shape: BlockShape,
    /// Filters, `D x T` row-major; column `t` is the filter of triple `t`.
    pub w: Vec<f64>,
    /// Slab means, length `T`.
    pub mu: Vec<f64>,
    /// Slab precisions, length `T`.
    pub alpha: Vec<f64>,
    /// Diagonal of the visible precision, length `D`.
    pub lambda: Vec<f64>,
    /// `g` biases, `M x K`.
    pub g_bias: Vec<f64>,
    /// `h` biases, `N x K`.
    pub h_bias: Vec<f64>,
    /// `f` biases, length `K`.
    pub f_bias: Vec<f64>,
}

pub const TENSOR_NAMES: [&str; 7] = ["w", "mu", "alpha", "lambda", "g_bias", "h_bias", "f_bias"];

impl ModelParams {
    /// Zero filters and biases, unit slab means, precisions and visible precision.
    pub fn new(shape: BlockShape) -> Self {
        let t = shape.triples();
        Self {
            shape,
            w: vec![0.0; shape.d * t],
            mu: vec![1.0; t],
            alpha: vec![1.0; t],
            lambda: vec![1.0; shape.d],
            g_bias: vec![0.0; shape.m * shape.k],
            h_bias: vec![0.0; shape.n * shape.k],
            f_bias: vec![0.0; shape.k],
        }
    }

    #[inline]
    pub fn w_at(&self, dim: usize, t: usize) -> f64 {
        self.w[dim * self.shape.triples() + t]
    }

    /// Copy of the filter column of triple `t`.
    pub fn filter(&self, t: usize) -> Vec<f64> {
        let nt = self.shape.triples();
        (0..self.shape.d).map(|dim| self.w[dim * nt + t]).collect()
    }

    pub fn set_filter(&mut self, t: usize, col: &[f64]) {
        let nt = self.shape.triples();
        for (dim, &x) in col.iter().enumerate() {
            self.w[dim * nt + t] = x;
        }
    }

    pub fn filter_norm(&self, t: usize) -> f64 {
        let nt = self.shape.triples();
        (0..self.shape.d)
            .map(|dim| self.w[dim * nt + t].powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Filter responses `u_t = v . W_t` for every triple.
    pub fn projections(&self, v: &[f64]) -> Vec<f64> {
        let nt = self.shape.triples();
        let mut u = vec![0.0; nt];
        for (dim, &vd) in v.iter().enumerate() {
            if vd == 0.0 {
                continue;
            }
            let row = &self.w[dim * nt..(dim + 1) * nt];
            for (acc, &wv) in u.iter_mut().zip(row) {
                *acc += vd * wv;
            }
        }
        u
    }

    /// Verify tensor lengths and positivity of the precisions.
    pub fn validate(&self) -> Result<()> {
        let s = self.shape;
        BlockShape::new(s.d, s.k, s.m, s.n)?;
        let t = s.triples();
        check_len("w", s.d * t, self.w.len())?;
        check_len("mu", t, self.mu.len())?;
        check_len("alpha", t, self.alpha.len())?;
        check_len("lambda", s.d, self.lambda.len())?;
        check_len("g_bias", s.m * s.k, self.g_bias.len())?;
        check_len("h_bias", s.n * s.k, self.h_bias.len())?;
        check_len("f_bias", s.k, self.f_bias.len())?;
        self.check_alpha()?;
        if let Some((idx, &value)) = self
            .lambda
            .iter()
            .enumerate()
            .find(|(_, &l)| !(l > 0.0))
        {
            return Err(Error::InvalidConfig(format!(
                "visible precision lambda[{idx}] = {value} must be positive"
            )));
        }
        Ok(())
    }

    pub(crate) fn check_alpha(&self) -> Result<()> {
        match self.alpha.iter().enumerate().find(|(_, &a)| !(a > 0.0)) {
            Some((index, &value)) => Err(Error::NonPositivePrecision { index, value }),
            None => Ok(()),
        }
    }

    pub fn tensors(&self) -> [&[f64]; 7] {
        [
            &self.w,
            &self.mu,
            &self.alpha,
            &self.lambda,
            &self.g_bias,
            &self.h_bias,
            &self.f_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 7] {
        [
            &mut self.w,
            &mut self.mu,
            &mut self.alpha,
            &mut self.lambda,
            &mut self.g_bias,
            &mut self.h_bias,
            &mut self.f_bias,
        ]
    }
}

/// One joint configuration of the binary spike units.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpikeConfig {
    pub f: Vec<bool>,
    /// `M x K`, indexed by [`BlockShape::g_index`].
    pub g: Vec<bool>,
    /// `N x K`, indexed by [`BlockShape::h_index`].
    pub h: Vec<bool>,
}

impl SpikeConfig {
    pub fn zeros(shape: &BlockShape) -> Self {
        Self {
            f: vec![false; shape.k],
            g: vec![false; shape.m * shape.k],
            h: vec![false; shape.n * shape.k],
        }
    }

    pub fn ones(shape: &BlockShape) -> Self {
        Self {
            f: vec![true; shape.k],
            g: vec![true; shape.m * shape.k],
            h: vec![true; shape.n * shape.k],
        }
    }

    /// Decode an enumeration index: bit `b` of `index` is unit `b` in the
    /// order `f`, then `g`, then `h`.
    pub fn from_index(shape: &BlockShape, index: u64) -> Self {
        let mut bit = 0;
        let mut take = |len: usize| -> Vec<bool> {
            let out = (0..len).map(|o| (index >> (bit + o)) & 1 == 1).collect();
            bit += len;
            out
        };
        let f = take(shape.k);
        let g = take(shape.m * shape.k);
        let h = take(shape.n * shape.k);
        Self { f, g, h }
    }

    pub fn to_index(&self) -> u64 {
        self.f
            .iter()
            .chain(&self.g)
            .chain(&self.h)
            .enumerate()
            .fold(0u64, |acc, (b, &on)| acc | ((on as u64) << b))
    }

    #[inline]
    pub fn active(&self, shape: &BlockShape, t: usize) -> bool {
        let (i, j, k) = shape.triple_coords(t);
        self.f[k] && self.g[shape.g_index(i, k)] && self.h[shape.h_index(j, k)]
    }

    /// Gate `f_k g_ik h_jk` of every triple as 0/1.
    pub fn gates(&self, shape: &BlockShape) -> Vec<f64> {
        (0..shape.triples())
            .map(|t| if self.active(shape, t) { 1.0 } else { 0.0 })
            .collect()
    }

    pub fn check(&self, shape: &BlockShape) -> Result<()> {
        check_len("f", shape.k, self.f.len())?;
        check_len("g", shape.m * shape.k, self.g.len())?;
        check_len("h", shape.n * shape.k, self.h.len())
    }
}

impl std::fmt::Display for SpikeConfig {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let bits = |xs: &[bool]| xs.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>();
        write!(fmt, "f={} g={} h={}", bits(&self.f), bits(&self.g), bits(&self.h))
    }
}

/// A joint binary/real latent configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub spikes: SpikeConfig,
    /// Slabs, length `T`.
    pub s: Vec<f64>,
}

impl LatentSample {
    pub fn zeros(shape: &BlockShape) -> Self {
        Self {
            spikes: SpikeConfig::zeros(shape),
            s: vec![0.0; shape.triples()],
        }
    }

    pub fn check(&self, shape: &BlockShape) -> Result<()> {
        self.spikes.check(shape)?;
        check_len("s", shape.triples(), self.s.len())
    }
}

/// Gradient accumulator with one tensor per [`ModelParams`] field.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad {
    pub shape: BlockShape,
    pub w: Vec<f64>,
    pub mu: Vec<f64>,
    pub alpha: Vec<f64>,
    pub lambda: Vec<f64>,
    pub g_bias: Vec<f64>,
    pub h_bias: Vec<f64>,
    pub f_bias: Vec<f64>,
}

impl ParamGrad {
    pub fn zeros(shape: BlockShape) -> Self {
        let t = shape.triples();
        Self {
            shape,
            w: vec![0.0; shape.d * t],
            mu: vec![0.0; t],
            alpha: vec![0.0; t],
            lambda: vec![0.0; shape.d],
            g_bias: vec![0.0; shape.m * shape.k],
            h_bias: vec![0.0; shape.n * shape.k],
            f_bias: vec![0.0; shape.k],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 7] {
        [
            &self.w,
            &self.mu,
            &self.alpha,
            &self.lambda,
            &self.g_bias,
            &self.h_bias,
            &self.f_bias,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 7] {
        [
            &mut self.w,
            &mut self.mu,
            &mut self.alpha,
            &mut self.lambda,
            &mut self.g_bias,
            &mut self.h_bias,
            &mut self.f_bias,
        ]
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ParamGrad, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (a, &b) in dst.iter_mut().zip(src) {
                *a += scale * b;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for dst in self.tensors_mut() {
            dst.iter_mut().for_each(|a| *a *= factor);
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Name of the first tensor holding a non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.tensors()
            .iter()
            .zip(TENSOR_NAMES)
            .find(|(t, _)| t.iter().any(|x| !x.is_finite()))
            .map(|(_, name)| name)
    }

    /// Elementwise difference `self - other`.
    pub fn minus(&self, other: &ParamGrad) -> ParamGrad {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }
}
