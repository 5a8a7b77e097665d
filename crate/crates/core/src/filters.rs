//! Filter visualisation as binary PPM images.

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::toydata::{CHANNELS, TOY_DIM, WIDTH};

/// How a filter vector maps onto pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    /// Channel-major color strip: `channels x width`, drawn as one RGB row.
    Color { channels: usize, width: usize },
    /// Row-major grayscale patch.
    Gray { height: usize, width: usize },
}

impl Geometry {
    pub fn for_dim(d: usize) -> Self {
        if d == TOY_DIM {
            return Geometry::Color {
                channels: CHANNELS,
                width: WIDTH,
            };
        }
        let side = (d as f64).sqrt().round() as usize;
        if side * side == d {
            Geometry::Gray { height: side, width: side }
        } else {
            Geometry::Gray { height: 1, width: d }
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Geometry::Color { channels, width } => channels * width,
            Geometry::Gray { height, width } => height * width,
        }
    }

    fn tile_size(&self) -> (usize, usize) {
        match *self {
            Geometry::Color { width, .. } => (1, width),
            Geometry::Gray { height, width } => (height, width),
        }
    }
}

/// A decoded or rendered P6 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ppm {
    pub width: usize,
    pub height: usize,
    pub comments: Vec<String>,
    /// RGB triples, row-major.
    pub rgb: Vec<u8>,
}

impl Ppm {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = b"P6\n".to_vec();
        for c in &self.comments {
            for line in c.lines() {
                out.extend_from_slice(format!("# {line}\n").as_bytes());
            }
        }
        out.extend_from_slice(format!("{} {}\n255\n", self.width, self.height).as_bytes());
        out.extend_from_slice(&self.rgb);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Corrupt(format!("ppm: {m}"));
        let mut pos = 0;
        let mut comments = Vec::new();
        let mut tokens = Vec::new();
        while tokens.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos >= bytes.len() {
                return Err(bad("truncated header"));
            }
            if bytes[pos] == b'#' {
                let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
                let text = String::from_utf8_lossy(&bytes[pos + 1..end]);
                comments.push(text.strip_prefix(' ').unwrap_or(&text).to_string());
                pos = end;
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            tokens.push(String::from_utf8_lossy(&bytes[start..pos]).to_string());
        }
        if tokens[0] != "P6" || tokens[3] != "255" {
            return Err(bad("not an 8-bit P6 image"));
        }
        let width: usize = tokens[1].parse().map_err(|_| bad("width"))?;
        let height: usize = tokens[2].parse().map_err(|_| bad("height"))?;
        let rgb = bytes.get(pos + 1..).ok_or_else(|| bad("missing raster"))?.to_vec();
        if rgb.len() != width * height * 3 {
            return Err(bad("raster size mismatch"));
        }
        Ok(Self {
            width,
            height,
            comments,
            rgb,
        })
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let o = (y * self.width + x) * 3;
        [self.rgb[o], self.rgb[o + 1], self.rgb[o + 2]]
    }
}

/// Min-max normalize to `0..=255`; a constant tile becomes mid-gray.
fn normalize(values: &[f64]) -> Vec<u8> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi - lo > 0.0) {
        return vec![128; values.len()];
    }
    values
        .iter()
        .map(|x| ((x - lo) / (hi - lo) * 255.0).round() as u8)
        .collect()
}

/// Render block `k` as an `M x N` grid of filter tiles, each magnified by
/// `scale` and separated by a one-pixel black gutter.
pub fn render_block(p: &ModelParams, k: usize, geom: Geometry, scale: usize, comments: &[String]) -> Result<Ppm> {
    let s = p.shape;
    if k >= s.k {
        return Err(Error::InvalidConfig(format!("block {k} out of range (K = {})", s.k)));
    }
    if geom.dim() != s.d {
        return Err(Error::ShapeMismatch {
            what: "filter geometry",
            expected: s.d,
            got: geom.dim(),
        });
    }
    let scale = scale.max(1);
    let (th, tw) = geom.tile_size();
    let (cell_h, cell_w) = (th * scale + 1, tw * scale + 1);
    let width = s.n * cell_w + 1;
    let height = s.m * cell_h + 1;
    let mut rgb = vec![0u8; width * height * 3];
    for i in 0..s.m {
        for j in 0..s.n {
            let t = s.triple(i, j, k);
            let tile = normalize(&p.filter(t));
            for ty in 0..th {
                for tx in 0..tw {
                    let color = match geom {
                        Geometry::Color { channels, width } => {
                            let mut c = [0u8; 3];
                            for (ch, slot) in c.iter_mut().enumerate().take(channels) {
                                *slot = tile[ch * width + tx];
                            }
                            c
                        }
                        Geometry::Gray { width, .. } => [tile[ty * width + tx]; 3],
                    };
                    for dy in 0..scale {
                        for dx in 0..scale {
                            let y = i * cell_h + 1 + ty * scale + dy;
                            let x = j * cell_w + 1 + tx * scale + dx;
                            let o = (y * width + x) * 3;
                            rgb[o..o + 3].copy_from_slice(&color);
                        }
                    }
                }
            }
        }
    }
    Ok(Ppm {
        width,
        height,
        comments: comments.to_vec(),
        rgb,
    })
}

/// Index of the channel with the largest summed weight.
pub fn dominant_channel(filter: &[f64], channels: usize, width: usize) -> usize {
    (0..channels)
        .map(|c| filter[c * width..(c + 1) * width].iter().sum::<f64>())
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (c, v)| if v > best.1 { (c, v) } else { best })
        .0
}

/// Fraction of `g`-rows (over all blocks) whose filters share one dominant
/// color channel across every column.
pub fn row_color_consistency(p: &ModelParams, channels: usize, width: usize) -> f64 {
    let s = p.shape;
    let mut consistent = 0;
    for k in 0..s.k {
        for i in 0..s.m {
            let first = dominant_channel(&p.filter(s.triple(i, 0, k)), channels, width);
            if (1..s.n).all(|j| dominant_channel(&p.filter(s.triple(i, j, k)), channels, width) == first) {
                consistent += 1;
            }
        }
    }
    consistent as f64 / (s.m * s.k) as f64
}
