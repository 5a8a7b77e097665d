//! Feature extraction from mean-field codes and linear read-out evaluation.

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::meanfield::{mf_infer, MfConfig};
use crate::params::{BlockShape, ModelParams};
use crate::toydata::Dataset;
use crate::trainer::center;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureKind {
    /// Spike marginal times the norm of its expected slab row/column.
    #[default]
    Factored,
    /// Every expected gated slab.
    Unfactored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FeatureSpec {
    pub kind: FeatureKind,
    /// Append `f̂` (factored features only).
    pub include_f: bool,
}

impl FeatureSpec {
    pub fn len(&self, shape: &BlockShape) -> usize {
        match self.kind {
            FeatureKind::Factored => {
                shape.m * shape.k + shape.n * shape.k + if self.include_f { shape.k } else { 0 }
            }
            FeatureKind::Unfactored => shape.triples(),
        }
    }

    /// Column names in output order.
    pub fn names(&self, shape: &BlockShape) -> Vec<String> {
        match self.kind {
            FeatureKind::Factored => {
                let mut out = Vec::with_capacity(self.len(shape));
                for i in 0..shape.m {
                    for k in 0..shape.k {
                        out.push(format!("g_{i}_{k}"));
                    }
                }
                for j in 0..shape.n {
                    for k in 0..shape.k {
                        out.push(format!("h_{j}_{k}"));
                    }
                }
                if self.include_f {
                    out.extend((0..shape.k).map(|k| format!("f_{k}")));
                }
                out
            }
            FeatureKind::Unfactored => (0..shape.triples())
                .map(|t| {
                    let (i, j, k) = shape.triple_coords(t);
                    format!("s_{i}_{j}_{k}")
                })
                .collect(),
        }
    }
}

/// Feature vector of one (already centered) input.
pub fn extract(v: &[f64], p: &ModelParams, spec: &FeatureSpec, mf: &MfConfig) -> Result<Vec<f64>> {
    let q = mf_infer(v, p, mf)?;
    let s = p.shape;
    match spec.kind {
        FeatureKind::Unfactored => Ok(q.s_hat),
        FeatureKind::Factored => {
            let mut out = Vec::with_capacity(spec.len(&s));
            for i in 0..s.m {
                for k in 0..s.k {
                    let norm = (0..s.n)
                        .map(|j| q.s_hat[s.triple(i, j, k)].powi(2))
                        .sum::<f64>()
                        .sqrt();
                    out.push(q.g_hat[s.g_index(i, k)] * norm);
                }
            }
            for j in 0..s.n {
                for k in 0..s.k {
                    let norm = (0..s.m)
                        .map(|i| q.s_hat[s.triple(i, j, k)].powi(2))
                        .sum::<f64>()
                        .sqrt();
                    out.push(q.h_hat[s.h_index(j, k)] * norm);
                }
            }
            if spec.include_f {
                out.extend_from_slice(&q.f_hat);
            }
            Ok(out)
        }
    }
}

/// Features for every row of `rows` after subtracting `centering`.
pub fn extract_all(
    rows: crate::trainer::Rows<'_>,
    centering: &[f64],
    p: &ModelParams,
    spec: &FeatureSpec,
    mf: &MfConfig,
) -> Result<Vec<Vec<f64>>> {
    check_len("data dim", p.shape.d, rows.dim)?;
    let centered = center(rows, centering);
    centered
        .par_chunks(rows.dim)
        .map(|v| extract(v, p, spec, mf))
        .collect()
}

/// Multinomial logistic regression model.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// `classes x features`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub classes: Vec<usize>,
    pub n_features: usize,
    pub iterations: usize,
}

pub const MAX_ITERS: usize = 10_000;
pub const GRAD_TOL: f64 = 1e-5;
pub const REG_GRID: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];

impl LinearModel {
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let f = self.n_features;
        self.bias
            .iter()
            .enumerate()
            .map(|(c, b)| b + self.weights[c * f..(c + 1) * f].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    z.iter_mut().for_each(|x| {
        *x = (*x - max).exp();
        sum += *x;
    });
    z.iter_mut().for_each(|x| *x /= sum);
}

/// L2-penalized multinomial logistic regression by full-batch gradient
/// descent on standardized features, stopping at gradient norm `GRAD_TOL` or
/// `MAX_ITERS` iterations. The bias is not penalized.
pub fn fit_linear(features: &[Vec<f64>], labels: &[usize], reg: f64) -> Result<LinearModel> {
    check_len("labels", features.len(), labels.len())?;
    if !(reg >= 0.0) {
        return Err(Error::InvalidConfig(format!("regularization {reg} must be >= 0")));
    }
    let mut classes: Vec<usize> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::DegenerateLabels(classes.len()));
    }
    let n = features.len();
    let nf = features[0].len();
    if let Some(bad) = features.iter().find(|r| r.len() != nf) {
        return Err(Error::ShapeMismatch {
            what: "feature row",
            expected: nf,
            got: bad.len(),
        });
    }
    let nc = classes.len();
    let class_of: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();

    let mut mean = vec![0.0; nf];
    for row in features {
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += x / n as f64);
    }
    let mut sd = vec![0.0; nf];
    for row in features {
        for ((s, x), m) in sd.iter_mut().zip(row).zip(&mean) {
            *s += (x - m) * (x - m) / n as f64;
        }
    }
    sd.iter_mut().for_each(|s| *s = if *s > 1e-24 { s.sqrt() } else { 1.0 });
    let z: Vec<f64> = features
        .iter()
        .flat_map(|row| row.iter().zip(&mean).zip(&sd).map(|((x, m), s)| (x - m) / s))
        .collect();

    let mean_sq = z.chunks(nf.max(1)).map(|r| r.iter().map(|x| x * x).sum::<f64>() + 1.0).sum::<f64>()
        / n as f64;
    let step = 1.0 / (0.5 * mean_sq + reg);

    let mut w = vec![0.0; nc * nf];
    let mut b = vec![0.0; nc];
    let mut gw = vec![0.0; nc * nf];
    let mut gb = vec![0.0; nc];
    let mut probs = vec![0.0; nc];
    let mut iterations = 0;
    for it in 0..MAX_ITERS {
        gw.iter_mut().for_each(|g| *g = 0.0);
        gb.iter_mut().for_each(|g| *g = 0.0);
        for (row, &y) in z.chunks(nf.max(1)).zip(&class_of) {
            for c in 0..nc {
                probs[c] = b[c] + w[c * nf..(c + 1) * nf].iter().zip(row).map(|(a, x)| a * x).sum::<f64>();
            }
            softmax_in_place(&mut probs);
            probs[y] -= 1.0;
            for c in 0..nc {
                gb[c] += probs[c];
                let gr = &mut gw[c * nf..(c + 1) * nf];
                gr.iter_mut().zip(row).for_each(|(g, x)| *g += probs[c] * x);
            }
        }
        let inv_n = 1.0 / n as f64;
        gb.iter_mut().for_each(|g| *g *= inv_n);
        gw.iter_mut().zip(&w).for_each(|(g, wv)| *g = *g * inv_n + reg * wv);
        let gnorm = gw.iter().chain(&gb).map(|g| g * g).sum::<f64>().sqrt();
        iterations = it;
        if gnorm <= GRAD_TOL {
            break;
        }
        w.iter_mut().zip(&gw).for_each(|(a, g)| *a -= step * g);
        b.iter_mut().zip(&gb).for_each(|(a, g)| *a -= step * g);
        iterations = it + 1;
    }

    // fold the standardization back into raw-feature weights
    let mut weights = vec![0.0; nc * nf];
    let mut bias = b;
    for c in 0..nc {
        for f in 0..nf {
            let wr = w[c * nf + f] / sd[f];
            weights[c * nf + f] = wr;
            bias[c] -= wr * mean[f];
        }
    }
    Ok(LinearModel {
        weights,
        bias,
        classes,
        n_features: nf,
        iterations,
    })
}

/// Highest-scoring class per row; ties go to the smallest label.
pub fn predict(m: &LinearModel, features: &[Vec<f64>]) -> Vec<usize> {
    features
        .iter()
        .map(|x| {
            let s = m.scores(x);
            let best = s
                .iter()
                .enumerate()
                .fold(0, |best, (c, &v)| if v > s[best] { c } else { best });
            m.classes[best]
        })
        .collect()
}

pub fn accuracy(m: &LinearModel, features: &[Vec<f64>], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predict(m, features)
        .iter()
        .zip(labels)
        .filter(|(a, b)| a == b)
        .count();
    hits as f64 / labels.len() as f64
}

/// Pick the penalty from `grid` on a held-out last fifth, then refit on all
/// rows. Ties keep the smaller penalty.
pub fn fit_linear_cv(features: &[Vec<f64>], labels: &[usize], grid: &[f64]) -> Result<(LinearModel, f64)> {
    check_len("labels", features.len(), labels.len())?;
    let n = features.len();
    let split = n - n / 5;
    let mut best = (f64::NEG_INFINITY, grid.first().copied().unwrap_or(1e-2));
    if n / 5 > 0 {
        for &reg in grid {
            let Ok(m) = fit_linear(&features[..split], &labels[..split], reg) else {
                continue;
            };
            let acc = accuracy(&m, &features[split..], &labels[split..]);
            if acc > best.0 {
                best = (acc, reg);
            }
        }
    }
    let model = fit_linear(features, labels, best.1)?;
    Ok((model, best.1))
}

/// Per-bit accuracies of linear decoders for each (factor, feature group).
#[derive(Debug, Clone, PartialEq)]
pub struct DecodabilityReport {
    pub color_from_g: f64,
    pub color_from_h: f64,
    pub position_from_g: f64,
    pub position_from_h: f64,
    /// `(factor, group, bit, accuracy, reg)` for every trained decoder.
    pub decoders: Vec<(String, String, usize, f64, f64)>,
}

impl DecodabilityReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("factor,group,accuracy\n");
        for (factor, group, acc) in [
            ("color", "g", self.color_from_g),
            ("color", "h", self.color_from_h),
            ("position", "g", self.position_from_g),
            ("position", "h", self.position_from_h),
        ] {
            out.push_str(&format!("{factor},{group},{acc:.6}\n"));
        }
        out
    }
}

impl std::fmt::Display for DecodabilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "per-bit decoding accuracy   g-features   h-features")?;
        writeln!(f, "color                       {:>10.4}   {:>10.4}", self.color_from_g, self.color_from_h)?;
        write!(f, "position                    {:>10.4}   {:>10.4}", self.position_from_g, self.position_from_h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOptions {
    pub mf: MfConfig,
    pub centering: Vec<f64>,
    /// Fraction of the dataset (leading rows) used to fit decoders.
    pub train_frac: f64,
    pub grid: Vec<f64>,
}

impl DecodeOptions {
    pub fn new(dim: usize) -> Self {
        Self {
            mf: MfConfig::default(),
            centering: vec![0.0; dim],
            train_frac: 0.8,
            grid: REG_GRID.to_vec(),
        }
    }
}

/// Train linear decoders of every color and position bit from the `g`-block
/// and the `h`-block of the factored features; report per-bit accuracy on
/// the held-out tail, averaged per (factor, group).
pub fn decodability_report(
    data: &Dataset,
    p: &ModelParams,
    spec: &FeatureSpec,
    opts: &DecodeOptions,
) -> Result<DecodabilityReport> {
    if spec.kind != FeatureKind::Factored {
        return Err(Error::InvalidConfig(
            "decodability needs factored features to separate g and h groups".into(),
        ));
    }
    if data.color_width == 0 || data.position_width == 0 {
        return Err(Error::InvalidConfig("decodability needs labeled data".into()));
    }
    let feats = extract_all(data.rows(), &opts.centering, p, spec, &opts.mf)?;
    let s = p.shape;
    let g_cols = 0..s.m * s.k;
    let h_cols = s.m * s.k..(s.m + s.n) * s.k;
    let pick = |cols: &std::ops::Range<usize>| -> Vec<Vec<f64>> {
        feats.iter().map(|r| r[cols.clone()].to_vec()).collect()
    };
    let groups = [("g", pick(&g_cols)), ("h", pick(&h_cols))];
    let split = ((data.len() as f64) * opts.train_frac).round() as usize;
    if split == 0 || split >= data.len() {
        return Err(Error::InvalidConfig("train_frac leaves an empty split".into()));
    }

    let mut jobs = Vec::new();
    for (gi, (gname, _)) in groups.iter().enumerate() {
        for bit in 0..data.color_width {
            jobs.push(("color", *gname, gi, bit, data.color_bit(bit)));
        }
        for bit in 0..data.position_width {
            jobs.push(("position", *gname, gi, bit, data.position_bit(bit)));
        }
    }
    let results: Vec<(String, String, usize, f64, f64)> = jobs
        .par_iter()
        .map(|(factor, gname, gi, bit, labels)| -> Result<_> {
            let x = &groups[*gi].1;
            let (m, reg) = fit_linear_cv(&x[..split], &labels[..split], &opts.grid)?;
            let acc = accuracy(&m, &x[split..], &labels[split..]);
            Ok((factor.to_string(), gname.to_string(), *bit, acc, reg))
        })
        .collect::<Result<_>>()?;
    let avg = |factor: &str, group: &str| {
        let accs: Vec<f64> = results
            .iter()
            .filter(|r| r.0 == factor && r.1 == group)
            .map(|r| r.3)
            .collect();
        accs.iter().sum::<f64>() / accs.len() as f64
    };
    Ok(DecodabilityReport {
        color_from_g: avg("color", "g"),
        color_from_h: avg("color", "h"),
        position_from_g: avg("position", "g"),
        position_from_h: avg("position", "h"),
        decoders: results,
    })
}
