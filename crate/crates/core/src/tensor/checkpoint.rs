//! Binary parameter checkpoints.
//!
//! Layout (little-endian): magic `SKCK`, version u16, entry count u32, then
//! per entry in sorted path order within each kind: kind u8 (0 parameter,
//! 1 buffer), path length u16, UTF-8 path, rank u8, rank × u32 dims,
//! product(dims) × f64 values.

use super::{ParameterSet, Tensor};
use thiserror::Error;

const MAGIC: &[u8; 4] = b"SKCK";
const VERSION: u16 = 1;
const KIND_PARAM: u8 = 0;
const KIND_BUFFER: u8 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckpointError {
    #[error("not a checkpoint (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u16),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("malformed entry: {0}")]
    Malformed(String),
    #[error("shape mismatch for {path}: checkpoint {found:?}, model {expected:?}")]
    ShapeMismatch {
        path: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint lacks {0}")]
    MissingEntry(String),
    #[error("checkpoint has {0}, which the model does not")]
    UnexpectedEntry(String),
}

pub fn save_checkpoint(params: &ParameterSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let entries: Vec<(u8, &str, &Tensor)> = params
        .values()
        .map(|(p, t)| (KIND_PARAM, p, t))
        .chain(params.buffers().map(|(p, t)| (KIND_BUFFER, p, t)))
        .collect();
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (kind, path, t) in entries {
        out.push(kind);
        out.extend_from_slice(&(path.len() as u16).to_le_bytes());
        out.extend_from_slice(path.as_bytes());
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.buf.len() - self.pos < n {
            return Err(CheckpointError::Truncated(self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Entries of a checkpoint: `(is_buffer, path, tensor)`.
pub fn read_checkpoint(bytes: &[u8]) -> Result<Vec<(bool, String, Tensor)>, CheckpointError> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    let magic: [u8; 4] = c.take(4).map_err(|_| {
        let mut m = [0u8; 4];
        m[..bytes.len().min(4)].copy_from_slice(&bytes[..bytes.len().min(4)]);
        CheckpointError::BadMagic(m)
    })?
    .try_into()
    .unwrap();
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let count = c.u32()?;
    let mut entries = Vec::new();
    for _ in 0..count {
        let kind = c.u8()?;
        if kind > KIND_BUFFER {
            return Err(CheckpointError::Malformed(format!("entry kind {kind}")));
        }
        let len = c.u16()? as usize;
        let path = std::str::from_utf8(c.take(len)?)
            .map_err(|_| CheckpointError::Malformed("path is not UTF-8".into()))?
            .to_string();
        let rank = c.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(c.u32()? as usize);
        }
        let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let n = match n {
            Some(n) if rank > 0 && n > 0 => n,
            _ => return Err(CheckpointError::Malformed(format!("{path} has shape {shape:?}"))),
        };
        let raw = c.take(n.checked_mul(8).ok_or(CheckpointError::Truncated(c.pos))?)?;
        let values = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let t = Tensor::from_vec(&shape, values).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        entries.push((kind == KIND_BUFFER, path, t));
    }
    if c.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - c.pos));
    }
    Ok(entries)
}

/// Overwrites `params` (values and buffers) from a checkpoint. Every entry
/// must exist in `params` with the same shape and vice versa.
pub fn load_checkpoint(bytes: &[u8], params: &mut ParameterSet) -> Result<(), CheckpointError> {
    let entries = read_checkpoint(bytes)?;
    let expected: usize = params.len() + params.buffers().count();
    for (is_buffer, path, t) in &entries {
        let current = if *is_buffer {
            params.buffers().find(|(p, _)| p == path).map(|(_, t)| t)
        } else {
            params.values().find(|(p, _)| p == path).map(|(_, t)| t)
        };
        let Some(current) = current else {
            return Err(CheckpointError::UnexpectedEntry(path.clone()));
        };
        if current.shape() != t.shape() {
            return Err(CheckpointError::ShapeMismatch {
                path: path.clone(),
                expected: current.shape().to_vec(),
                found: t.shape().to_vec(),
            });
        }
    }
    if entries.len() != expected {
        let missing = params
            .values()
            .chain(params.buffers())
            .map(|(p, _)| p.to_string())
            .find(|p| !entries.iter().any(|(_, q, _)| q == p))
            .unwrap_or_default();
        return Err(CheckpointError::MissingEntry(missing));
    }
    for (is_buffer, path, t) in entries {
        if is_buffer {
            *params.buffer_mut(&path) = t;
        } else {
            *params.value_mut(&path) = t;
        }
    }
    Ok(())
}
