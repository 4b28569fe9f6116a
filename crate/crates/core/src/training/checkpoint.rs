//! Binary checkpoint container.
//!
//! Layout (little-endian):
//! ```text
//! "DCRN" | u32 version | u8 stage | u64 config hash | u32 epoch
//! u32 len | model config (TOML)
//! u32 len | effective run config (free text)
//! u8 has_optimizer | u64 optimizer step
//! u32 record count, then per record:
//!     u32 name len | name (UTF-8) | u8 rank | u32 dims[rank] | f32 payload
//! ```
//! Parameter records use the names of [`DccrnParams::named`]; optimizer
//! moments are stored as `adam.m.<name>` and `adam.v.<name>`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{AdamState, Stage};
use crate::error::{Error, Result};
use crate::model::{DccrnParams, ModelConfig};

const MAGIC: &[u8; 4] = b"DCRN";
pub const CHECKPOINT_VERSION: u32 = 1;

/// 64-bit FNV-1a of the effective configuration text.
pub fn config_hash(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: DccrnParams<f32>,
    pub stage: Stage,
    /// Epochs completed within `stage`.
    pub epoch: u32,
    pub optimizer: Option<AdamState<f32>>,
    pub config_hash: u64,
    /// The effective configuration the run was started with.
    pub config_text: String,
}

impl Checkpoint {
    pub fn new(
        params: DccrnParams<f32>,
        stage: Stage,
        epoch: u32,
        optimizer: Option<AdamState<f32>>,
        config_text: String,
    ) -> Self {
        Self { params, stage, epoch, optimizer, config_hash: config_hash(&config_text), config_text }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.push(self.stage.tag());
        out.extend_from_slice(&self.config_hash.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        let model = toml::to_string(&self.params.config).expect("model config serializes");
        for text in [model.as_str(), self.config_text.as_str()] {
            out.extend_from_slice(&(text.len() as u32).to_le_bytes());
            out.extend_from_slice(text.as_bytes());
        }
        out.push(self.optimizer.is_some() as u8);
        out.extend_from_slice(&self.optimizer.as_ref().map_or(0, |s| s.step).to_le_bytes());

        let named = self.params.named();
        let mut records: Vec<(String, &[usize], &[f32])> =
            named.iter().map(|(n, _, t)| (n.clone(), t.shape(), t.data())).collect();
        if let Some(opt) = &self.optimizer {
            for (i, (n, _, t)) in named.iter().enumerate() {
                records.push((format!("adam.m.{n}"), t.shape(), &opt.m[i]));
                records.push((format!("adam.v.{n}"), t.shape(), &opt.v[i]));
            }
        }
        out.extend_from_slice(&(records.len() as u32).to_le_bytes());
        for (name, shape, data) in records {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(shape.len() as u8);
            for d in shape {
                out.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::CorruptCheckpoint("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion { found: version, expected: CHECKPOINT_VERSION });
        }
        let tag = r.u8()?;
        let stage = Stage::from_tag(tag).ok_or_else(|| Error::CorruptCheckpoint(format!("unknown stage tag {tag}")))?;
        let hash = r.u64()?;
        let epoch = r.u32()?;
        let model_text = r.string()?;
        let config_text = r.string()?;
        let has_opt = match r.u8()? {
            0 => false,
            1 => true,
            v => return Err(Error::CorruptCheckpoint(format!("bad optimizer flag {v}"))),
        };
        let step = r.u64()?;
        let model: ModelConfig =
            toml::from_str(&model_text).map_err(|e| Error::CorruptCheckpoint(format!("model config: {e}")))?;
        let mut params =
            DccrnParams::<f32>::zeros(&model).map_err(|e| Error::CorruptCheckpoint(format!("model config: {e}")))?;

        let count = r.u32()? as usize;
        let mut records: HashMap<String, (Vec<usize>, Vec<f32>)> = HashMap::new();
        for _ in 0..count {
            let name = r.string()?;
            let rank = r.u8()? as usize;
            let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len = shape.iter().try_fold(1usize, |a, d| a.checked_mul(*d));
            let len = len
                .filter(|l| l.checked_mul(4).is_some())
                .ok_or_else(|| Error::CorruptCheckpoint(format!("{name}: absurd shape {shape:?}")))?;
            let payload = r.take(len * 4)?;
            let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
            if records.insert(name.clone(), (shape, data)).is_some() {
                return Err(Error::CorruptCheckpoint(format!("duplicate record {name}")));
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::CorruptCheckpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
        }

        let mut take = |name: &str, shape: &[usize]| -> Result<Vec<f32>> {
            let (s, d) =
                records.remove(name).ok_or_else(|| Error::CorruptCheckpoint(format!("missing record {name}")))?;
            if s != shape {
                return Err(Error::CorruptCheckpoint(format!("{name}: shape {s:?}, expected {shape:?}")));
            }
            Ok(d)
        };
        let mut m = Vec::new();
        let mut v = Vec::new();
        for (name, _, t) in params.named_mut() {
            let shape = t.shape().to_vec();
            t.data_mut().copy_from_slice(&take(&name, &shape)?);
            if has_opt {
                m.push(take(&format!("adam.m.{name}"), &shape)?);
                v.push(take(&format!("adam.v.{name}"), &shape)?);
            }
        }
        if let Some(extra) = records.keys().next() {
            return Err(Error::CorruptCheckpoint(format!("unexpected record {extra}")));
        }
        let optimizer = has_opt.then_some(AdamState { step, m, v });
        Ok(Self { params, stage, epoch, optimizer, config_hash: hash, config_text })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len()).ok_or_else(|| {
            Error::TruncatedCheckpoint(format!(
                "needed {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::CorruptCheckpoint("invalid UTF-8 string".into()))
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    // Write-then-rename so an interrupted save never clobbers a good file.
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, ckpt.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
