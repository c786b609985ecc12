//! Binary named-tensor checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "LSGM" | version u32 | architecture u8 | layout hash u64
//! repeated until EOF:
//!     name length u16 | name bytes (UTF-8) | rank u8 | dims u32 × rank | f32 × prod(dims)
//! ```

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::{Parameters, Scalar};

pub const MAGIC: &[u8; 4] = b"LSGM";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint (bad magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated inside tensor {0:?}")]
    Truncated(String),
    #[error("tensor name is not UTF-8")]
    BadName,
    #[error("expected architecture tag {expected}, found {found}")]
    ArchitectureMismatch { expected: u8, found: u8 },
    #[error("tensor {name:?}: {reason}")]
    TensorMismatch { name: String, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub architecture: u8,
    pub layout_hash: u64,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_params<F: Scalar, P: Parameters<F>>(architecture: u8, layout_hash: u64, params: &P) -> Self {
        let tensors = params
            .named_params("")
            .into_iter()
            .map(|p| NamedTensor {
                name: p.name,
                shape: p.shape,
                data: p.data.iter().map(|v| v.as_f64() as f32).collect(),
            })
            .collect();
        Self {
            architecture,
            layout_hash,
            tensors,
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Copies every tensor into `params`, which must have exactly the same
    /// names and shapes in the same order.
    pub fn load_into<F: Scalar, P: Parameters<F>>(&self, expected_arch: u8, params: &mut P) -> Result<(), CheckpointError> {
        if self.architecture != expected_arch {
            return Err(CheckpointError::ArchitectureMismatch {
                expected: expected_arch,
                found: self.architecture,
            });
        }
        let layout: Vec<(String, Vec<usize>)> = params
            .named_params("")
            .into_iter()
            .map(|p| (p.name, p.shape))
            .collect();
        if layout.len() != self.tensors.len() {
            return Err(CheckpointError::TensorMismatch {
                name: String::new(),
                reason: format!("expected {} tensors, found {}", layout.len(), self.tensors.len()),
            });
        }
        for ((name, shape), t) in layout.iter().zip(&self.tensors) {
            if *name != t.name || *shape != t.shape {
                return Err(CheckpointError::TensorMismatch {
                    name: t.name.clone(),
                    reason: format!("expected {name} {shape:?}, found {} {:?}", t.name, t.shape),
                });
            }
        }
        for (dst, t) in params.params_mut().into_iter().zip(&self.tensors) {
            for (d, s) in dst.iter_mut().zip(&t.data) {
                *d = F::from_f64(*s as f64);
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[self.architecture])?;
        w.write_all(&self.layout_hash.to_le_bytes())?;
        for t in &self.tensors {
            let name = t.name.as_bytes();
            let len = u16::try_from(name.len())
                .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "tensor name too long"))?;
            let rank = u8::try_from(t.shape.len())
                .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "tensor rank too large"))?;
            w.write_all(&len.to_le_bytes())?;
            w.write_all(name)?;
            w.write_all(&[rank])?;
            for &d in &t.shape {
                let d = u32::try_from(d)
                    .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "dimension too large"))?;
                w.write_all(&d.to_le_bytes())?;
            }
            let mut buf = Vec::with_capacity(t.data.len() * 4);
            for v in &t.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, CheckpointError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let mut cur = Cursor { bytes, pos: 0 };
        let header = cur.take(17).ok_or_else(|| {
            let mut m = [0u8; 4];
            let n = bytes.len().min(4);
            m[..n].copy_from_slice(&bytes[..n]);
            if &m == MAGIC {
                CheckpointError::Truncated("<header>".into())
            } else {
                CheckpointError::BadMagic(m)
            }
        })?;
        let magic: [u8; 4] = header[..4].try_into().unwrap();
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic(magic));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let architecture = header[8];
        let layout_hash = u64::from_le_bytes(header[9..17].try_into().unwrap());
        let mut tensors = Vec::new();
        while !cur.at_end() {
            let truncated = |name: &str| CheckpointError::Truncated(name.to_string());
            let len = cur.u16().ok_or_else(|| truncated("<name>"))? as usize;
            let name = cur.take(len).ok_or_else(|| truncated("<name>"))?;
            let name = String::from_utf8(name.to_vec()).map_err(|_| CheckpointError::BadName)?;
            let rank = cur.take(1).ok_or_else(|| truncated(&name))?[0] as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(cur.u32().ok_or_else(|| truncated(&name))? as usize);
            }
            let count: usize = shape.iter().product();
            let raw = cur
                .take(count.checked_mul(4).ok_or_else(|| truncated(&name))?)
                .ok_or_else(|| truncated(&name))?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push(NamedTensor { name, shape, data });
        }
        Ok(Self {
            architecture,
            layout_hash,
            tensors,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_le_bytes(b.try_into().unwrap()))
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn at_end(&self) -> bool {
        self.pos >= self.bytes.len()
    }
}
