//! Model checkpoints.
//!
//! Layout (integers little-endian):
//!
//! ```text
//! "OBFCKPT1"
//! u32 length, UTF-8 header text (`tasks = ...`, `seed = ...`, [model] section)
//! u32 array count
//! per array: u16 name length, name, u8 rank, u32 dims, f64 values
//! 32-byte SHA-256 of everything above
//! ```
//!
//! Values are stored as 64-bit floats so a reloaded model reproduces the
//! trained one exactly.

use std::path::Path;

use obf_core::model::{Task, TaskSet};
use obf_core::ObfModel;
use sha2::{Digest, Sha256};

use crate::config::{model_text, read_model, tasks_text};
use crate::corpus::write_atomic;
use crate::error::{ObfError, Result};
use crate::kv::{push_line, KvFile};

const MAGIC: &[u8; 8] = b"OBFCKPT1";

pub fn to_bytes(model: &ObfModel, seed: u64) -> Vec<u8> {
    let mut header = String::new();
    push_line(&mut header, "tasks", tasks_text(model.tasks));
    push_line(&mut header, "seed", seed);
    header.push_str(&model_text(&model.config));

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    let specs: Vec<_> = model
        .params
        .specs
        .iter()
        .map(|s| (s, &model.params.values))
        .chain(
            model
                .buffers
                .specs
                .iter()
                .map(|s| (s, &model.buffers.values)),
        )
        .collect();
    out.extend_from_slice(&(specs.len() as u32).to_le_bytes());
    for (spec, values) in specs {
        out.extend_from_slice(&(spec.name.len() as u16).to_le_bytes());
        out.extend_from_slice(spec.name.as_bytes());
        out.push(spec.shape.len() as u8);
        for &d in &spec.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in spec.slot.of(values) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> std::result::Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn parse_tasks(text: &str) -> std::result::Result<TaskSet, String> {
    let mut set = TaskSet::none();
    for name in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let t: Task = name.parse().map_err(|_| format!("unknown task `{name}`"))?;
        set = set.with(t);
    }
    Ok(set)
}

/// The model and the seed it was built with.
pub fn from_bytes(bytes: &[u8]) -> std::result::Result<(ObfModel, u64), String> {
    if bytes.len() < MAGIC.len() + 32 || &bytes[..MAGIC.len()] != MAGIC {
        return Err("not a checkpoint file".into());
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err("checksum mismatch".into());
    }
    let mut c = Cursor {
        bytes: body,
        pos: MAGIC.len(),
    };
    let header_len = c.u32()? as usize;
    let header = std::str::from_utf8(c.take(header_len)?).map_err(|e| e.to_string())?;
    let kv = KvFile::parse(header).map_err(|e| e.to_string())?;
    let mut config = Default::default();
    read_model(&kv, &mut config).map_err(|e| e.to_string())?;
    let tasks = parse_tasks(kv.require_str("tasks").map_err(|e| e.to_string())?)?;
    let seed: u64 = kv
        .get("seed", "an integer")
        .map_err(|e| e.to_string())?
        .ok_or("missing seed")?;
    kv.finish().map_err(|e| e.to_string())?;
    let mut model = ObfModel::new(config, tasks, seed).map_err(|e| e.to_string())?;

    let count = c.u32()? as usize;
    let mut arrays: Vec<(String, Vec<f64>)> = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = c.u16()? as usize;
        let name = std::str::from_utf8(c.take(name_len)?)
            .map_err(|e| e.to_string())?
            .to_string();
        let rank = c.u8()? as usize;
        let shape = (0..rank)
            .map(|_| c.u32().map(|d| d as usize))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let expected = model.params.get(&name).or_else(|| model.buffers.get(&name));
        match expected {
            Some(spec) if spec.shape == shape => {}
            Some(spec) => {
                return Err(format!(
                    "array `{name}` has shape {shape:?}, model expects {:?}",
                    spec.shape
                ));
            }
            None => return Err(format!("unexpected array `{name}`")),
        }
        let n: usize = shape.iter().product();
        let raw = c.take(n * 8)?;
        let values = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        arrays.push((name, values));
    }
    if c.pos != body.len() {
        return Err("trailing bytes after the last array".into());
    }
    model
        .load_arrays(arrays.iter().map(|(n, v)| (n.as_str(), v.as_slice())))
        .map_err(|e| e.to_string())?;
    Ok((model, seed))
}

pub fn save(path: &Path, model: &ObfModel, seed: u64) -> Result<()> {
    write_atomic(path, &to_bytes(model, seed))
}

pub fn load(path: &Path) -> Result<(ObfModel, u64)> {
    let bytes = std::fs::read(path).map_err(|e| ObfError::io(path, e))?;
    from_bytes(&bytes).map_err(|e| ObfError::Data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use obf_core::{Backbone, ModelConfig};

    fn model() -> ObfModel {
        let cfg = ModelConfig {
            backbone: Backbone::Lstm,
            hidden: 8,
            ..Default::default()
        };
        let mut m = ObfModel::new(cfg, TaskSet::all().without(Task::Pc), 5).unwrap();
        m.params
            .values
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v += i as f64 * 1e-9);
        m
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let (back, seed) = from_bytes(&to_bytes(&m, 5)).unwrap();
        assert_eq!(seed, 5);
        assert_eq!(back.config, m.config);
        assert_eq!(back.tasks, m.tasks);
        assert_eq!(back.params, m.params);
        assert_eq!(back.buffers, m.buffers);
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = to_bytes(&model(), 5);
        let mid = bytes.len() / 2;
        bytes[mid] ^= 1;
        assert_eq!(from_bytes(&bytes).unwrap_err(), "checksum mismatch");
        assert!(from_bytes(b"hello").is_err());
    }
}
