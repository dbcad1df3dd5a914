//! Embedding store: one text header line, then binary records.
//!
//! ```text
//! OBFEMB1 dim=<d> count=<n> model=<hex> data=<hex>\n
//! per record: u16-prefixed source tag, participant id and stimulus id,
//!             u32 segment, d little-endian f32 values
//! ```
//!
//! `model` identifies the checkpoint the vectors came from; `data` is the
//! hash of the record bytes and is checked on load.

use std::path::Path;

use thiserror::Error;

use crate::config::short_hash;
use crate::corpus::write_atomic;
use crate::error::{ObfError, Result};

const MAGIC: &str = "OBFEMB1";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub source_tag: String,
    pub participant_id: String,
    pub stimulus_id: String,
    /// 0 for whole-scanpath embeddings, else the segment number.
    pub segment: u32,
    pub vector: Vec<f32>,
}

impl EmbeddingRecord {
    pub fn same_scanpath(&self, other: &Self) -> bool {
        self.source_tag == other.source_tag
            && self.participant_id == other.participant_id
            && self.stimulus_id == other.stimulus_id
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    pub dim: usize,
    pub model: String,
    records: Vec<EmbeddingRecord>,
}

#[derive(Debug, Error, PartialEq)]
pub enum StoreError {
    #[error("vector has dimension {got}, store holds dimension {dim}")]
    Dim { dim: usize, got: usize },
    #[error("malformed store header: {0}")]
    Header(String),
    #[error("truncated store")]
    Truncated,
    #[error("record data does not match the header checksum")]
    Checksum,
    #[error("bytes left over after the last announced record")]
    Trailing,
}

impl EmbeddingStore {
    pub fn new(dim: usize, model: impl Into<String>) -> Self {
        Self {
            dim,
            model: model.into(),
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, rec: EmbeddingRecord) -> Result<(), StoreError> {
        if rec.vector.len() != self.dim {
            return Err(StoreError::Dim {
                dim: self.dim,
                got: rec.vector.len(),
            });
        }
        self.records.push(rec);
        Ok(())
    }

    fn record_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.records.len() * (self.dim * 4 + 32));
        for r in &self.records {
            for s in [&r.source_tag, &r.participant_id, &r.stimulus_id] {
                out.extend_from_slice(&(s.len() as u16).to_le_bytes());
                out.extend_from_slice(s.as_bytes());
            }
            out.extend_from_slice(&r.segment.to_le_bytes());
            for v in &r.vector {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let body = self.record_bytes();
        let mut out = format!(
            "{MAGIC} dim={} count={} model={} data={}\n",
            self.dim,
            self.records.len(),
            self.model,
            short_hash(&body)
        )
        .into_bytes();
        out.extend_from_slice(&body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| StoreError::Header("no header line".into()))?;
        let header =
            std::str::from_utf8(&bytes[..nl]).map_err(|e| StoreError::Header(e.to_string()))?;
        let mut words = header.split(' ');
        if words.next() != Some(MAGIC) {
            return Err(StoreError::Header(format!("expected `{MAGIC}`")));
        }
        let mut field = |name: &str| -> Result<String, StoreError> {
            let w = words.next().unwrap_or("");
            w.strip_prefix(name)
                .and_then(|v| v.strip_prefix('='))
                .map(str::to_string)
                .ok_or_else(|| StoreError::Header(format!("expected `{name}=`, got `{w}`")))
        };
        let number = |v: String| {
            v.parse::<usize>()
                .map_err(|_| StoreError::Header(format!("bad number `{v}`")))
        };
        let dim = number(field("dim")?)?;
        let count = number(field("count")?)?;
        let model = field("model")?;
        let data = field("data")?;
        let body = &bytes[nl + 1..];
        if short_hash(body) != data {
            return Err(StoreError::Checksum);
        }
        let mut store = Self::new(dim, model);
        let mut pos = 0;
        let mut take = |n: usize| -> Result<&[u8], StoreError> {
            let s = body.get(pos..pos + n).ok_or(StoreError::Truncated)?;
            pos += n;
            Ok(s)
        };
        while store.records.len() < count {
            let mut text = || -> Result<String, StoreError> {
                let len = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
                String::from_utf8(take(len)?.to_vec())
                    .map_err(|e| StoreError::Header(e.to_string()))
            };
            let (source_tag, participant_id, stimulus_id) = (text()?, text()?, text()?);
            let segment = u32::from_le_bytes(take(4)?.try_into().unwrap());
            let vector = take(dim * 4)?
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect();
            store.push(EmbeddingRecord {
                source_tag,
                participant_id,
                stimulus_id,
                segment,
                vector,
            })?;
        }
        if pos != body.len() {
            return Err(StoreError::Trailing);
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| ObfError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| ObfError::Data(format!("{}: {e}", path.display())))
    }
}
