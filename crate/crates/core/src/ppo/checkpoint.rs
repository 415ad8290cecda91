//! Binary checkpoint format.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        4 bytes  "RPFC"
//! version      u32      currently 1
//! header_len   u32
//! header       JSON     {"arch": NetArch, "episode": n, "optimizer": null | {"beta1", "beta2", "eps", "t"}}
//! n_tensors    u32
//! tensor*      u32 rows, u32 cols, rows·cols f64 (row-major)
//! ```
//!
//! When the header names an optimizer, the parameter tensors are followed
//! by the first-moment tensors and then the second-moment tensors, each
//! block laid out like the parameters (count prefix included). Trailing
//! bytes are rejected.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{NetArch, PolicyParams, Tensor};

use super::adam::Adam;

pub const MAGIC: &[u8; 4] = b"RPFC";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint architecture does not match: expected {expected}, found {found}")]
    ArchMismatch { expected: String, found: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: PolicyParams,
    pub optimizer: Option<Adam>,
    /// Number of completed training episodes.
    pub episode: usize,
}

#[derive(Serialize, Deserialize)]
struct OptimizerHeader {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    arch: NetArch,
    episode: usize,
    optimizer: Option<OptimizerHeader>,
}

fn put_u32(out: &mut Vec<u8>, x: u32) {
    out.extend_from_slice(&x.to_le_bytes());
}

fn put_tensors(out: &mut Vec<u8>, tensors: &[Tensor]) {
    put_u32(out, tensors.len() as u32);
    for t in tensors {
        put_u32(out, t.rows as u32);
        put_u32(out, t.cols as u32);
        for x in &t.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
}

pub fn to_bytes(params: &PolicyParams, optimizer: Option<&Adam>, episode: usize) -> Vec<u8> {
    let header = Header {
        arch: params.arch().clone(),
        episode,
        optimizer: optimizer.map(|a| OptimizerHeader { beta1: a.beta1, beta2: a.beta2, eps: a.eps, t: a.t }),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + 8 * params.num_params() * 3);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u32(&mut out, json.len() as u32);
    out.extend_from_slice(&json);
    put_tensors(&mut out, params.tensors());
    if let Some(a) = optimizer {
        put_tensors(&mut out, &a.m);
        put_tensors(&mut out, &a.v);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| CheckpointError::Corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn tensors(&mut self) -> Result<Vec<Tensor>, CheckpointError> {
        let n = self.u32()? as usize;
        let mut out = Vec::new();
        for _ in 0..n {
            let rows = self.u32()? as usize;
            let cols = self.u32()? as usize;
            let len = rows
                .checked_mul(cols)
                .and_then(|l| l.checked_mul(8))
                .ok_or_else(|| CheckpointError::Corrupt("tensor size overflows".into()))?;
            let raw = self.take(len)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            out.push(Tensor::from_vec(rows, cols, data));
        }
        Ok(out)
    }
}

/// Decodes a checkpoint, optionally requiring a specific architecture.
pub fn from_bytes(bytes: &[u8], expected: Option<&NetArch>) -> Result<Checkpoint, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(CheckpointError::Corrupt("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::Version { found: version, expected: FORMAT_VERSION });
    }
    let len = r.u32()? as usize;
    let header: Header =
        serde_json::from_slice(r.take(len)?).map_err(|e| CheckpointError::Corrupt(format!("header: {e}")))?;
    if let Some(want) = expected {
        if !want.same_network(&header.arch) {
            return Err(CheckpointError::ArchMismatch {
                expected: serde_json::to_string(want).unwrap_or_default(),
                found: serde_json::to_string(&header.arch).unwrap_or_default(),
            });
        }
    }
    let params = PolicyParams::from_tensors(&header.arch, r.tensors()?)
        .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    let optimizer = match header.optimizer {
        None => None,
        Some(h) => {
            let m = r.tensors()?;
            let v = r.tensors()?;
            let shapes_ok = |ts: &[Tensor]| {
                ts.len() == params.tensors().len() && ts.iter().zip(params.tensors()).all(|(a, b)| a.shape() == b.shape())
            };
            if !shapes_ok(&m) || !shapes_ok(&v) {
                return Err(CheckpointError::Corrupt("optimizer state shape".into()));
            }
            Some(Adam { beta1: h.beta1, beta2: h.beta2, eps: h.eps, t: h.t, m, v })
        }
    };
    if r.pos != bytes.len() {
        return Err(CheckpointError::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Checkpoint { params, optimizer, episode: header.episode })
}

/// Writes via a sibling temporary file so a failed save never leaves a partial checkpoint.
pub fn save_checkpoint(
    path: &Path,
    params: &PolicyParams,
    optimizer: Option<&Adam>,
    episode: usize,
) -> Result<(), CheckpointError> {
    let bytes = to_bytes(params, optimizer, episode);
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, expected: Option<&NetArch>) -> Result<Checkpoint, CheckpointError> {
    from_bytes(&fs::read(path)?, expected)
}
