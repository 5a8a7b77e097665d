//! Synthetic color/position strips with ground-truth factor labels.
//!
//! Each sample is a 3-channel strip of 20 pixels, stored channel-major. The
//! strip holds five 4-pixel slots; every occupied slot shows the image's
//! single color, so an image is described by 3 color bits and 5 placement
//! bits.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gibbs::chain_rng;

pub const CHANNELS: usize = 3;
pub const WIDTH: usize = 20;
pub const SLOTS: usize = 5;
pub const SLOT_WIDTH: usize = WIDTH / SLOTS;
pub const TOY_DIM: usize = CHANNELS * WIDTH;

const MAGIC: &[u8; 9] = b"HOSSDATA1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyConfig {
    pub n_samples: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Allow the empty placement (no occupied slot).
    pub include_empty: bool,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            noise_sigma: 0.1,
            seed: 0,
            include_empty: true,
        }
    }
}

/// Row-major samples plus optional per-sample label bits.
///
/// Labels are stored as `color_width + position_width` bytes per sample; a
/// dataset without labels has both widths zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub pixels: Vec<f64>,
    pub color_width: usize,
    pub position_width: usize,
    pub labels: Vec<u8>,
}

/// Borrowed view of one labeled toy sample.
#[derive(Debug, Clone, Copy)]
pub struct ToySample<'a> {
    pub pixels: &'a [f64],
    pub color_bits: &'a [u8],
    pub position_bits: &'a [u8],
}

impl Dataset {
    pub fn unlabeled(dim: usize, pixels: Vec<f64>) -> Result<Self> {
        if dim == 0 || !pixels.len().is_multiple_of(dim) {
            return Err(Error::InvalidConfig(format!(
                "pixel buffer of {} values does not hold rows of {dim}",
                pixels.len()
            )));
        }
        Ok(Self {
            dim,
            pixels,
            color_width: 0,
            position_width: 0,
            labels: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.pixels.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn label_width(&self) -> usize {
        self.color_width + self.position_width
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.pixels[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> crate::trainer::Rows<'_> {
        crate::trainer::Rows {
            data: &self.pixels,
            dim: self.dim,
        }
    }

    pub fn sample(&self, i: usize) -> ToySample<'_> {
        let w = self.label_width();
        let labels = &self.labels[i * w..(i + 1) * w];
        ToySample {
            pixels: self.row(i),
            color_bits: &labels[..self.color_width],
            position_bits: &labels[self.color_width..],
        }
    }

    /// Column `bit` of the color labels.
    pub fn color_bit(&self, bit: usize) -> Vec<usize> {
        (0..self.len()).map(|i| self.sample(i).color_bits[bit] as usize).collect()
    }

    pub fn position_bit(&self, bit: usize) -> Vec<usize> {
        (0..self.len()).map(|i| self.sample(i).position_bits[bit] as usize).collect()
    }

    /// Samples `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        let w = self.label_width();
        Dataset {
            dim: self.dim,
            pixels: self.pixels[range.start * self.dim..range.end * self.dim].to_vec(),
            color_width: self.color_width,
            position_width: self.position_width,
            labels: self.labels[range.start * w..range.end * w].to_vec(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(41 + self.pixels.len() * 8 + self.labels.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        out.extend_from_slice(&(self.color_width as u32).to_le_bytes());
        out.extend_from_slice(&(self.position_width as u32).to_le_bytes());
        for x in &self.pixels {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.extend_from_slice(&self.labels);
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::Corrupt(format!("dataset: {m}"));
        if bytes.len() < MAGIC.len() + 24 + 4 {
            return Err(corrupt("file too short"));
        }
        if &bytes[..MAGIC.len()] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(corrupt("checksum mismatch"));
        }
        let mut cur = Cursor::new(&body[MAGIC.len()..]);
        let n = cur.u64()? as usize;
        let dim = cur.u64()? as usize;
        let color_width = cur.u32()? as usize;
        let position_width = cur.u32()? as usize;
        if dim == 0 {
            return Err(corrupt("zero dimension"));
        }
        let n_pix = n
            .checked_mul(dim)
            .ok_or_else(|| corrupt("size overflow"))?;
        let n_lab = n
            .checked_mul(color_width + position_width)
            .ok_or_else(|| corrupt("size overflow"))?;
        if cur.remaining() != n_pix * 8 + n_lab {
            return Err(corrupt("payload length does not match header"));
        }
        let pixels = (0..n_pix).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        let labels = cur.take(n_lab)?.to_vec();
        Ok(Self {
            dim,
            pixels,
            color_width,
            position_width,
            labels,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Corrupt("unexpected end of data".into()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().expect("16 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Noise-free strip for the given factors.
pub fn render(color: &[u8; CHANNELS], positions: &[u8; SLOTS]) -> Vec<f64> {
    let mut px = vec![0.0; TOY_DIM];
    for (c, &on_c) in color.iter().enumerate() {
        if on_c == 0 {
            continue;
        }
        for (slot, &on_p) in positions.iter().enumerate() {
            if on_p == 0 {
                continue;
            }
            let start = c * WIDTH + slot * SLOT_WIDTH;
            px[start..start + SLOT_WIDTH].iter_mut().for_each(|x| *x = 1.0);
        }
    }
    px
}

/// Generate a labeled toy dataset. Sample `i` draws from its own stream
/// `(seed, i)`, so generation is order- and thread-independent.
pub fn gen_toy(cfg: &ToyConfig) -> Result<Dataset> {
    if !(cfg.noise_sigma >= 0.0) || !cfg.noise_sigma.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "noise sigma {} must be finite and >= 0",
            cfg.noise_sigma
        )));
    }
    let samples: Vec<(Vec<f64>, [u8; CHANNELS + SLOTS])> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = chain_rng(cfg.seed, i as u64, 0);
            let mut color = [0u8; CHANNELS];
            color.iter_mut().for_each(|b| *b = rng.random_bool(0.5) as u8);
            let mut positions = [0u8; SLOTS];
            loop {
                positions.iter_mut().for_each(|b| *b = rng.random_bool(0.5) as u8);
                if cfg.include_empty || positions.contains(&1) {
                    break;
                }
            }
            let mut px = render(&color, &positions);
            if cfg.noise_sigma > 0.0 {
                for x in px.iter_mut() {
                    *x += cfg.noise_sigma * rng.sample::<f64, _>(StandardNormal);
                }
            }
            let mut labels = [0u8; CHANNELS + SLOTS];
            labels[..CHANNELS].copy_from_slice(&color);
            labels[CHANNELS..].copy_from_slice(&positions);
            (px, labels)
        })
        .collect();
    let mut pixels = Vec::with_capacity(cfg.n_samples * TOY_DIM);
    let mut labels = Vec::with_capacity(cfg.n_samples * (CHANNELS + SLOTS));
    for (px, lab) in samples {
        pixels.extend_from_slice(&px);
        labels.extend_from_slice(&lab);
    }
    Ok(Dataset {
        dim: TOY_DIM,
        pixels,
        color_width: CHANNELS,
        position_width: SLOTS,
        labels,
    })
}
