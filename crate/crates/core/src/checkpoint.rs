//! `HOSS1` checkpoint format.
//!
//! ```text
//! "HOSS1" | version u32 | D K M N (u64 each)
//! W | mu | alpha | lambda | c | d | e            raw little-endian f64 arrays
//! { tag u8 | length u64 | payload }*  0u8        optional sections
//! crc32 u32                                      over every preceding byte
//! ```
//!
//! Section tags: 1 centering vector, 2 Gibbs chains, 3 training progress,
//! 4 resolved configuration text, 5 training log rows.

use std::path::Path;

use crate::error::{Error, Result};
use crate::gibbs::ChainState;
use crate::params::{BlockShape, LatentSample, ModelParams, SpikeConfig};
use crate::toydata::Cursor;

const MAGIC: &[u8; 5] = b"HOSS1";
pub const VERSION: u32 = 1;

const TAG_END: u8 = 0;
const TAG_CENTERING: u8 = 1;
const TAG_CHAINS: u8 = 2;
const TAG_PROGRESS: u8 = 3;
const TAG_CONFIG: u8 = 4;
const TAG_LOG: u8 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSnapshot {
    pub seed: u64,
    pub chains: Vec<ChainState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub epoch: u64,
    pub updates: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub centering: Option<Vec<f64>>,
    pub chains: Option<ChainSnapshot>,
    pub progress: Option<Progress>,
    pub config: Option<String>,
    /// CSV rows of every completed epoch.
    pub log: Option<String>,
}

impl Checkpoint {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            centering: None,
            chains: None,
            progress: None,
            config: None,
            log: None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let s = p.shape;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for x in [s.d, s.k, s.m, s.n] {
            out.extend_from_slice(&(x as u64).to_le_bytes());
        }
        for tensor in p.tensors() {
            put_f64s(&mut out, tensor);
        }
        if let Some(c) = &self.centering {
            let mut body = Vec::new();
            put_f64s(&mut body, c);
            put_section(&mut out, TAG_CENTERING, &body);
        }
        if let Some(snap) = &self.chains {
            put_section(&mut out, TAG_CHAINS, &encode_chains(snap));
        }
        if let Some(pr) = &self.progress {
            let mut body = Vec::new();
            body.extend_from_slice(&pr.epoch.to_le_bytes());
            body.extend_from_slice(&pr.updates.to_le_bytes());
            put_section(&mut out, TAG_PROGRESS, &body);
        }
        if let Some(text) = &self.config {
            put_section(&mut out, TAG_CONFIG, text.as_bytes());
        }
        if let Some(text) = &self.log {
            put_section(&mut out, TAG_LOG, text.as_bytes());
        }
        out.push(TAG_END);
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| Error::Corrupt(format!("checkpoint: {m}"));
        if bytes.len() < MAGIC.len() + 4 + 32 + 1 + 4 {
            return Err(corrupt("file too short"));
        }
        if &bytes[..MAGIC.len()] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().expect("4 bytes")) {
            return Err(corrupt("checksum mismatch"));
        }
        let mut cur = Cursor::new(&body[MAGIC.len()..]);
        let version = cur.u32()?;
        if version != VERSION {
            return Err(corrupt(&format!("unsupported version {version}")));
        }
        let dims: Vec<usize> = (0..4).map(|_| cur.u64().map(|x| x as usize)).collect::<Result<_>>()?;
        let shape = BlockShape::new(dims[0], dims[1], dims[2], dims[3])
            .map_err(|e| corrupt(&e.to_string()))?;
        let mut params = ModelParams::new(shape);
        for tensor in params.tensors_mut() {
            let n = tensor.len();
            *tensor = get_f64s(&mut cur, n)?;
        }
        let mut ck = Checkpoint::new(params);
        loop {
            let tag = cur.u8()?;
            if tag == TAG_END {
                break;
            }
            let len = cur.u64()? as usize;
            let payload = cur.take(len)?;
            let mut sec = Cursor::new(payload);
            match tag {
                TAG_CENTERING => ck.centering = Some(get_f64s(&mut sec, shape.d)?),
                TAG_CHAINS => ck.chains = Some(decode_chains(&mut sec, &shape)?),
                TAG_PROGRESS => {
                    ck.progress = Some(Progress {
                        epoch: sec.u64()?,
                        updates: sec.u64()?,
                    })
                }
                TAG_CONFIG | TAG_LOG => {
                    let text = String::from_utf8(payload.to_vec())
                        .map_err(|_| corrupt("text section is not UTF-8"))?;
                    if tag == TAG_CONFIG {
                        ck.config = Some(text);
                    } else {
                        ck.log = Some(text);
                    }
                }
                other => return Err(corrupt(&format!("unknown section tag {other}"))),
            }
            if tag != TAG_CONFIG && tag != TAG_LOG && sec.remaining() != 0 {
                return Err(corrupt("section length mismatch"));
            }
        }
        if cur.remaining() != 0 {
            return Err(corrupt("trailing bytes after end marker"));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn get_f64s(cur: &mut Cursor<'_>, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| cur.f64()).collect()
}

fn put_section(out: &mut Vec<u8>, tag: u8, body: &[u8]) {
    out.push(tag);
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(body);
}

fn put_bits(out: &mut Vec<u8>, bits: &[bool]) {
    out.extend(bits.iter().map(|&b| b as u8));
}

fn get_bits(cur: &mut Cursor<'_>, n: usize) -> Result<Vec<bool>> {
    cur.take(n)?
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(Error::Corrupt("checkpoint: spike byte is not 0/1".into())),
        })
        .collect()
}

fn encode_chains(snap: &ChainSnapshot) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&snap.seed.to_le_bytes());
    out.extend_from_slice(&(snap.chains.len() as u64).to_le_bytes());
    for c in &snap.chains {
        out.extend_from_slice(&c.rng_stream_id.to_le_bytes());
        out.extend_from_slice(&c.rng_word_pos.to_le_bytes());
        put_f64s(&mut out, &c.v);
        put_bits(&mut out, &c.x.spikes.f);
        put_bits(&mut out, &c.x.spikes.g);
        put_bits(&mut out, &c.x.spikes.h);
        put_f64s(&mut out, &c.x.s);
    }
    out
}

fn decode_chains(cur: &mut Cursor<'_>, shape: &BlockShape) -> Result<ChainSnapshot> {
    let seed = cur.u64()?;
    let n = cur.u64()? as usize;
    let mut chains = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let rng_stream_id = cur.u64()?;
        let rng_word_pos = cur.u128()?;
        let v = get_f64s(cur, shape.d)?;
        let f = get_bits(cur, shape.k)?;
        let g = get_bits(cur, shape.m * shape.k)?;
        let h = get_bits(cur, shape.n * shape.k)?;
        let s = get_f64s(cur, shape.triples())?;
        chains.push(ChainState {
            x: LatentSample {
                spikes: SpikeConfig { f, g, h },
                s,
            },
            v,
            rng_stream_id,
            rng_word_pos,
        });
    }
    Ok(ChainSnapshot { seed, chains })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let shape = BlockShape::new(3, 2, 2, 1).unwrap();
        let mut p = ModelParams::new(shape);
        p.w.iter_mut().enumerate().for_each(|(i, w)| *w = (i as f64).cos());
        p.f_bias = vec![-1.0, 0.25];
        let mut ck = Checkpoint::new(p);
        ck.centering = Some(vec![0.1, 0.2, 0.3]);
        ck.progress = Some(Progress { epoch: 4, updates: 1200 });
        ck.config = Some("lr=0.001\nepochs=4\n".into());
        ck.log = Some("1,2.5e-1,3e0,1e0,1e-3\n".into());
        let gcfg = crate::gibbs::GibbsConfig {
            n_chains: 3,
            seed: 9,
            ..Default::default()
        };
        let mut chains =
            crate::gibbs::init_chains(&ck.params, &gcfg, crate::gibbs::ChainInit::Noise).unwrap();
        crate::gibbs::advance_chains(&mut chains, &ck.params, &gcfg, 2).unwrap();
        ck.chains = Some(ChainSnapshot { seed: 9, chains });
        ck
    }

    #[test]
    fn layout_starts_with_header_and_tensors() {
        let ck = Checkpoint::new(ModelParams::new(BlockShape::new(1, 1, 1, 1).unwrap()));
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..5], b"HOSS1");
        assert_eq!(u32::from_le_bytes(bytes[5..9].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[9..17].try_into().unwrap()), 1);
        // header + 7 scalar tensors + end marker + crc
        assert_eq!(bytes.len(), 5 + 4 + 32 + 7 * 8 + 1 + 4);
        // W is the first tensor, then mu = 1.0
        assert_eq!(f64::from_le_bytes(bytes[41..49].try_into().unwrap()), 0.0);
        assert_eq!(f64::from_le_bytes(bytes[49..57].try_into().unwrap()), 1.0);
    }

    #[test]
    fn round_trip_with_sections() {
        let ck = sample();
        assert_eq!(Checkpoint::from_bytes(&ck.to_bytes()).unwrap(), ck);
    }

    #[test]
    fn detects_corruption() {
        let bytes = sample().to_bytes();
        let mut bad = bytes.clone();
        bad[60] ^= 0x10;
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(Error::Corrupt(_))));
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 9]),
            Err(Error::Corrupt(_))
        ));
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&magic), Err(Error::Corrupt(_))));
    }
}
