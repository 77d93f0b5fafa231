//! Weight file encoding/decoding (the `.bcw` format).
//!
//! Layout, all little-endian with no alignment padding:
//! magic `BCW1`; seven u32 config fields (layers, hidden, heads, ffn_dim,
//! vocab_size, max_positions, max_seq); u32 tensor count; then per tensor
//! a u16 name length, the UTF-8 name, a u8 rank, rank u32 dims, and the
//! row-major f32 data.
//!
//! Dropout rates are training-time settings, not weights, so they are not
//! stored; a loaded config carries the default rates.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::tensor::Tensor;

use super::{ModelConfig, ModelError, ParameterSet};

pub const WEIGHT_MAGIC: [u8; 4] = *b"BCW1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WeightFormatError {
    #[error("not a weight file: magic {found:?} (expected {WEIGHT_MAGIC:?})")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported weight format version {found:?} (this build reads version '1')")]
    UnsupportedVersion { found: char },
    #[error("weight file truncated while reading {reading}")]
    Truncated { reading: &'static str },
    #[error("tensor name is not valid UTF-8")]
    BadName,
    #[error("weight file declares {found} tensors, this architecture has {expected}")]
    WrongTensorCount { expected: usize, found: usize },
    #[error("unknown tensor {name:?} for this architecture")]
    UnknownTensor { name: String },
    #[error("tensor {name:?} appears twice")]
    DuplicateTensor { name: String },
    #[error("tensor {name:?} has shape {found:?}, config implies {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("weight file has {count} trailing bytes after the last tensor")]
    TrailingBytes { count: usize },
    #[error("config header is invalid: {0}")]
    BadConfig(ModelError),
}

/// Serializes parameters plus the architecture header.
pub fn to_bytes(params: &ParameterSet<f32>, config: &ModelConfig) -> Vec<u8> {
    let named = params.named();
    let mut out = Vec::new();
    out.extend_from_slice(&WEIGHT_MAGIC);
    for field in [
        config.num_layers,
        config.hidden,
        config.heads,
        config.ffn_dim,
        config.vocab_size,
        config.max_positions,
        config.max_seq,
    ] {
        out.extend_from_slice(&(field as u32).to_le_bytes());
    }
    out.extend_from_slice(&(named.len() as u32).to_le_bytes());
    for (name, tensor) in named {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(tensor.dims().len() as u8);
        for &dim in tensor.dims() {
            out.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for &value in tensor.data() {
            out.extend_from_slice(&value.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, reading: &'static str) -> Result<&'a [u8], WeightFormatError> {
        let end = self
            .offset
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or(WeightFormatError::Truncated { reading })?;
        let slice = &self.bytes[self.offset..end];
        self.offset = end;
        Ok(slice)
    }

    fn u8(&mut self, reading: &'static str) -> Result<u8, WeightFormatError> {
        Ok(self.take(1, reading)?[0])
    }

    fn u16(&mut self, reading: &'static str) -> Result<u16, WeightFormatError> {
        let b = self.take(2, reading)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, reading: &'static str) -> Result<u32, WeightFormatError> {
        let b = self.take(4, reading)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.offset
    }
}

/// Decodes a weight file; the tensor inventory must match the header's
/// architecture exactly. Bitwise-lossless against [`to_bytes`].
pub fn from_bytes(bytes: &[u8]) -> Result<(ParameterSet<f32>, ModelConfig), WeightFormatError> {
    let mut r = Reader { bytes, offset: 0 };
    let magic = r.take(4, "magic")?;
    if magic != WEIGHT_MAGIC {
        if &magic[..3] == b"BCW" {
            return Err(WeightFormatError::UnsupportedVersion {
                found: magic[3] as char,
            });
        }
        return Err(WeightFormatError::BadMagic {
            found: [magic[0], magic[1], magic[2], magic[3]],
        });
    }

    let num_layers = r.u32("config.num_layers")? as usize;
    let hidden = r.u32("config.hidden")? as usize;
    let heads = r.u32("config.heads")? as usize;
    let ffn_dim = r.u32("config.ffn_dim")? as usize;
    let vocab_size = r.u32("config.vocab_size")? as usize;
    let max_positions = r.u32("config.max_positions")? as usize;
    let max_seq = r.u32("config.max_seq")? as usize;
    let config = ModelConfig {
        num_layers,
        hidden,
        heads,
        ffn_dim,
        vocab_size,
        max_positions,
        max_seq,
        ..ModelConfig::default()
    };
    config.validate().map_err(WeightFormatError::BadConfig)?;

    let mut params = ParameterSet::<f32>::zeros(&config);
    let expected_count = params.named().len();
    let declared = r.u32("tensor count")? as usize;
    if declared != expected_count {
        return Err(WeightFormatError::WrongTensorCount {
            expected: expected_count,
            found: declared,
        });
    }

    let mut loaded: BTreeMap<String, (Vec<usize>, Vec<f32>)> = BTreeMap::new();
    for _ in 0..declared {
        let name_len = r.u16("tensor name length")? as usize;
        let name = core::str::from_utf8(r.take(name_len, "tensor name")?)
            .map_err(|_| WeightFormatError::BadName)?
            .to_string();
        let rank = r.u8("tensor rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("tensor dims")? as usize);
        }
        let len: usize = dims.iter().product();
        let raw = r.take(len * 4, "tensor data")?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if loaded.insert(name.clone(), (dims, data)).is_some() {
            return Err(WeightFormatError::DuplicateTensor { name });
        }
    }
    if r.remaining() > 0 {
        return Err(WeightFormatError::TrailingBytes {
            count: r.remaining(),
        });
    }

    for (name, tensor) in params.named_mut() {
        let (dims, data) = loaded
            .remove(&name)
            .ok_or_else(|| WeightFormatError::UnknownTensor {
                // The counts match, so a missing expected name means some
                // loaded name was not recognized; report that one.
                name: loaded.keys().next().cloned().unwrap_or_else(|| name.clone()),
            })?;
        if dims != tensor.dims() {
            return Err(WeightFormatError::ShapeMismatch {
                name,
                expected: tensor.dims().to_vec(),
                found: dims,
            });
        }
        *tensor = Tensor::from_vec(&dims, data);
    }
    Ok((params, config))
}
