//! Binary checkpoint container.
//!
//! Layout (little-endian): 8-byte magic `WBNETCKP`, `u32` format version,
//! `u64` metadata length, metadata JSON, `u32` tensor count, then per tensor
//! `u32` name length, UTF-8 name, `u32` rank, `u64` dims, `f64` values.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{NeuralError, ParamStore, Result, Tensor, UNetSpec};

pub const MAGIC: &[u8; 8] = b"WBNETCKP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub stage: String,
    pub utterances_seen: u64,
    pub validation_loss: f64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub config_hash: String,
    /// Architectures by parameter prefix.
    pub specs: BTreeMap<String, UNetSpec>,
    pub spec_fingerprint: String,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

impl CheckpointMeta {
    /// Combined fingerprint of all architectures.
    pub fn fingerprint_of(specs: &BTreeMap<String, UNetSpec>) -> String {
        specs
            .iter()
            .map(|(k, s)| format!("{k}:{}", s.fingerprint()))
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub store: ParamStore,
}

fn corrupt(path: &Path, reason: impl Into<String>) -> NeuralError {
    NeuralError::Checkpoint {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.buf.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if !self.meta.validation_loss.is_finite() {
            return Err(NeuralError::NonFinite("checkpoint validation loss".into()));
        }
        let meta = serde_json::to_vec(&self.meta).expect("metadata serialises");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta);
        out.extend_from_slice(&(self.store.len() as u32).to_le_bytes());
        for p in self.store.iter() {
            out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
            out.extend_from_slice(p.name.as_bytes());
            out.extend_from_slice(&(p.value.shape.len() as u32).to_le_bytes());
            for d in &p.value.shape {
                out.extend_from_slice(&(*d as u64).to_le_bytes());
            }
            for v in &p.value.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8) != Some(MAGIC.as_slice()) {
            return Err(corrupt(path, "not a checkpoint (bad magic)"));
        }
        let version = r.u32().ok_or_else(|| corrupt(path, "truncated header"))?;
        if version != FORMAT_VERSION {
            return Err(corrupt(path, format!("unsupported format version {version}")));
        }
        let meta_len = r.u64().ok_or_else(|| corrupt(path, "truncated header"))? as usize;
        let meta_bytes = r.take(meta_len).ok_or_else(|| corrupt(path, "truncated metadata"))?;
        let meta: CheckpointMeta = serde_json::from_slice(meta_bytes)
            .map_err(|e| corrupt(path, format!("metadata: {e}")))?;
        let count = r.u32().ok_or_else(|| corrupt(path, "truncated tensor table"))?;
        let mut store = ParamStore::new();
        for _ in 0..count {
            let trunc = || corrupt(path, "truncated tensor");
            let n = r.u32().ok_or_else(trunc)? as usize;
            let name = std::str::from_utf8(r.take(n).ok_or_else(trunc)?)
                .map_err(|_| corrupt(path, "tensor name is not UTF-8"))?
                .to_string();
            let rank = r.u32().ok_or_else(trunc)? as usize;
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(trunc)?;
            let len: usize = shape.iter().product();
            let raw = r.take(len.checked_mul(8).ok_or_else(trunc)?).ok_or_else(trunc)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            store.add(&name, Tensor::new(shape, data)?)?;
        }
        if r.pos != bytes.len() {
            return Err(corrupt(path, "trailing bytes"));
        }
        Ok(Self { meta, store })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes).map_err(|source| NeuralError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|source| NeuralError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes, path)
    }
}

/// Seconds since the epoch from `SOURCE_DATE_EPOCH` when set, otherwise the
/// system clock.
pub fn build_timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}
