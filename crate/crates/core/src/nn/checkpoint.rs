//! Binary checkpoint framing.
//!
//! ```text
//! "PCGU"            4 bytes
//! version           u32 LE
//! tensor count      u32 LE
//! per tensor:
//!   name length     u16 LE, then UTF-8 name
//!   ndim            u8, then each dim as u32 LE
//!   payload         f32 LE, row-major
//! ```
//!
//! Optimizer state uses the same framing under names starting with `__nadam.`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{Nadam, NadamConfig, Network, NnError, Tensor};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"PCGU";
pub const CHECKPOINT_VERSION: u32 = 1;
const OPT_PREFIX: &str = "__nadam.";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("tensor name is not valid UTF-8")]
    BadName,
    #[error("tensor `{0}` has an invalid shape")]
    BadShape(String),
    #[error("tensor `{0}` is missing")]
    Missing(String),
    #[error("tensor `{name}` has shape {found:?}, model expects {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint holds unknown tensor `{0}`")]
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Tensor<f32>,
}

pub fn encode_checkpoint(tensors: &[NamedTensor]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        let name = t.name.as_bytes();
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.push(t.tensor.shape().len() as u8);
        for &d in t.tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
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
        let end = end.ok_or(CheckpointError::Truncated(self.bytes.len()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<NamedTensor>, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).map_err(|_| CheckpointError::BadMagic)? != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let count = r.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(4096));
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = core::str::from_utf8(r.take(len)?)
            .map_err(|_| CheckpointError::BadName)?
            .into();
        let ndim = r.u8()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        let elems = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| CheckpointError::BadShape(String::clone(&name)))?;
        let raw = r.take(
            elems
                .checked_mul(4)
                .ok_or_else(|| CheckpointError::BadShape(name.clone()))?,
        )?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let tensor =
            Tensor::from_vec(&shape, data).map_err(|_| CheckpointError::BadShape(name.clone()))?;
        out.push(NamedTensor { name, tensor });
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(out)
}

/// Model tensors in graph order, followed by optimizer state when given.
pub fn checkpoint_tensors(net: &Network<f32>, optimizer: Option<&Nadam<f32>>) -> Vec<NamedTensor> {
    let mut out: Vec<NamedTensor> = net
        .named_tensors()
        .into_iter()
        .map(|(name, t)| NamedTensor {
            name,
            tensor: t.clone(),
        })
        .collect();
    if let Some(opt) = optimizer {
        // Exact for step counts below 2^24.
        out.push(NamedTensor {
            name: format!("{OPT_PREFIX}step"),
            tensor: Tensor::filled(&[1], opt.step_count() as f32),
        });
        let names = net.param_names();
        for (name, m) in names.iter().zip(opt.first_moments()) {
            out.push(NamedTensor {
                name: format!("{OPT_PREFIX}m.{name}"),
                tensor: m.clone(),
            });
        }
        for (name, v) in names.iter().zip(opt.second_moments()) {
            out.push(NamedTensor {
                name: format!("{OPT_PREFIX}v.{name}"),
                tensor: v.clone(),
            });
        }
    }
    out
}

/// Copy checkpoint tensors into `net` (which must have the same graph) and
/// rebuild the optimizer if its state was saved.
pub fn restore_checkpoint(
    net: &mut Network<f32>,
    tensors: &[NamedTensor],
    optimizer_config: NadamConfig,
) -> Result<Option<Nadam<f32>>, NnError> {
    let find = |name: &str| tensors.iter().find(|t| t.name == name);
    let take = |name: &str, expected: &[usize]| -> Result<Tensor<f32>, CheckpointError> {
        let t = find(name).ok_or_else(|| CheckpointError::Missing(name.into()))?;
        if t.tensor.shape() != expected {
            return Err(CheckpointError::ShapeMismatch {
                name: name.into(),
                expected: expected.to_vec(),
                found: t.tensor.shape().to_vec(),
            });
        }
        Ok(t.tensor.clone())
    };
    let mut known = 0;
    for (name, slot) in net.named_tensors_mut() {
        *slot = take(&name, slot.shape())?;
        known += 1;
    }
    let optimizer = if let Some(step) = find(&format!("{OPT_PREFIX}step")) {
        let names = net.param_names();
        let shapes: Vec<Vec<usize>> = net.params().iter().map(|p| p.shape().to_vec()).collect();
        let mut first = Vec::new();
        let mut second = Vec::new();
        for (name, shape) in names.iter().zip(&shapes) {
            first.push(take(&format!("{OPT_PREFIX}m.{name}"), shape)?);
            second.push(take(&format!("{OPT_PREFIX}v.{name}"), shape)?);
        }
        known += 1 + 2 * names.len();
        let step = step.tensor.data().first().copied().unwrap_or(0.0) as u64;
        Some(Nadam::from_state(optimizer_config, step, first, second)?)
    } else {
        None
    };
    if known != tensors.len() {
        let names = net
            .named_tensors()
            .into_iter()
            .map(|(n, _)| n)
            .collect::<Vec<_>>();
        let stray = tensors
            .iter()
            .find(|t| !names.contains(&t.name) && !t.name.starts_with(OPT_PREFIX))
            .map_or_else(|| String::from("(duplicate)"), |t| t.name.clone());
        return Err(CheckpointError::Unknown(stray).into());
    }
    Ok(optimizer)
}
