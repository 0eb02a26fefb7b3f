//! Parameter checkpoint files.
//!
//! Layout: magic `SUHM`, format version u32, a JSON metadata record
//! (u32 length + bytes), then repeated tensor records
//! `{name_len u32, name bytes, rank u32, dims u32 x rank, payload LE f32}`.
//! Optimizer moments are stored under `<name>.m1` / `<name>.m2`.
//! All integers little-endian.

use std::fs;
use std::path::{Path, PathBuf};

use crate::autodiff::{ParamSet, Tensor};
use crate::error::{Result, SuhmoError};

pub const MAGIC: &[u8; 4] = b"SUHM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Default)]
pub struct Checkpoint {
    /// Model hyperparameters and run info.
    pub meta: serde_json::Value,
    pub params: ParamSet,
}

pub fn encode(meta: &serde_json::Value, params: &ParamSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let meta_bytes = serde_json::to_vec(meta).expect("metadata serialization");
    out.extend_from_slice(&(meta_bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta_bytes);
    for (name, tensor) in params.iter() {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(tensor.rank() as u32).to_le_bytes());
        for &d in tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: PathBuf,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(SuhmoError::Truncated {
                path: self.path.clone(),
                expected: self.pos + n,
                actual: self.buf.len(),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode(buf: &[u8], origin: &Path) -> Result<Checkpoint> {
    let mut r = Reader { buf, pos: 0, path: origin.to_path_buf() };
    if r.take(4)? != MAGIC {
        return Err(SuhmoError::BadMagic { path: r.path, expected: "SUHM" });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(SuhmoError::BadVersion { path: r.path, version });
    }
    let meta_len = r.u32()? as usize;
    let meta: serde_json::Value = serde_json::from_slice(r.take(meta_len)?)
        .map_err(|e| SuhmoError::Malformed { path: r.path.clone(), reason: e.to_string() })?;

    let mut params = ParamSet::new();
    while r.pos < buf.len() {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|_| {
            SuhmoError::Malformed { path: r.path.clone(), reason: "non-utf8 parameter name".into() }
        })?;
        let rank = r.u32()? as usize;
        if rank > 3 {
            return Err(SuhmoError::Malformed {
                path: r.path.clone(),
                reason: format!("parameter {name:?} has rank {rank} > 3"),
            });
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &b| a.checked_mul(b))
            .ok_or_else(|| SuhmoError::Malformed {
                path: r.path.clone(),
                reason: format!("parameter {name:?} dims overflow"),
            })?;
        // guard against absurd sizes before allocating
        if n > buf.len() / 4 + 1 {
            return Err(SuhmoError::Truncated {
                path: r.path.clone(),
                expected: r.pos + 4 * n,
                actual: buf.len(),
            });
        }
        let payload = r.take(4 * n)?;
        let data: Vec<f64> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(SuhmoError::NonFinite { path: r.path.clone(), index: i });
        }
        if params.contains(&name) {
            return Err(SuhmoError::Malformed {
                path: r.path.clone(),
                reason: format!("duplicate parameter {name:?}"),
            });
        }
        params.insert(name, Tensor::new(data, &shape));
    }
    Ok(Checkpoint { meta, params })
}

pub fn save(path: &Path, meta: &serde_json::Value, params: &ParamSet) -> Result<()> {
    fs::write(path, encode(meta, params))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let buf = fs::read(path)?;
    decode(&buf, path)
}
