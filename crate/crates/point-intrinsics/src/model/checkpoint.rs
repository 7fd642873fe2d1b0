//! Checkpoint file format.
//!
//! Layout (all integers little-endian):
//!   magic            11 bytes  "POINTNETIID"
//!   format version   u32
//!   subnet count     u32
//!   per subnet:
//!     layer count    u32
//!     per layer:     u32 input width, u32 output width, u8 activation
//!                    (0 = ReLU, 1 = Tanh)
//!   parameters       f32 × N, in descriptor order: per subnet, per layer,
//!                    weight row-major then bias.
//!
//! The declared parameter count must match the payload exactly; hostile
//! headers are rejected before any allocation larger than the input.

use super::{Activation, LayerSpec, ModelError, ModelWeights, Subnet, SubnetArch, FORMAT_VERSION};
use crate::autodiff::Tensor;
use std::path::Path;
use thiserror::Error;

pub const MAGIC: &[u8; 11] = b"POINTNETIID";

const MAX_SUBNETS: u32 = 8;
const MAX_LAYERS: u32 = 64;
const MAX_WIDTH: u32 = 1 << 20;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io error on {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint shape mismatch: {0}")]
    ShapeMismatch(String),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Corrupt(format!("truncated while reading {what}")));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32, CheckpointError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u8(&mut self, what: &str) -> Result<u8, CheckpointError> {
        Ok(self.take(1, what)?[0])
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub fn to_bytes(weights: &ModelWeights) -> Vec<u8> {
    let subnets = [&weights.albedo_net, &weights.direction_net, &weights.shader];
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&weights.version.to_le_bytes());
    out.extend_from_slice(&(subnets.len() as u32).to_le_bytes());
    for subnet in subnets {
        out.extend_from_slice(&(subnet.arch().layers.len() as u32).to_le_bytes());
        for layer in &subnet.arch().layers {
            out.extend_from_slice(&(layer.input as u32).to_le_bytes());
            out.extend_from_slice(&(layer.output as u32).to_le_bytes());
            out.push(match layer.activation {
                Activation::Relu => 0,
                Activation::Tanh => 1,
            });
        }
    }
    for subnet in subnets {
        for tensor in subnet.params() {
            for &v in tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelWeights, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic").map(|m| m != MAGIC).unwrap_or(true) {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let subnet_count = r.u32("subnet count")?;
    if subnet_count != 3 {
        if subnet_count > MAX_SUBNETS {
            return Err(CheckpointError::Corrupt(format!("{subnet_count} subnets")));
        }
        return Err(CheckpointError::ShapeMismatch(format!(
            "expected 3 subnets, found {subnet_count}"
        )));
    }
    let mut archs = Vec::with_capacity(3);
    let mut total_params = 0usize;
    for s in 0..subnet_count {
        let layer_count = r.u32("layer count")?;
        if layer_count == 0 || layer_count > MAX_LAYERS {
            return Err(CheckpointError::Corrupt(format!("subnet {s}: {layer_count} layers")));
        }
        let mut layers = Vec::with_capacity(layer_count as usize);
        for l in 0..layer_count {
            let input = r.u32("layer input width")?;
            let output = r.u32("layer output width")?;
            let act = r.u8("layer activation")?;
            if input == 0 || output == 0 || input > MAX_WIDTH || output > MAX_WIDTH {
                return Err(CheckpointError::Corrupt(format!(
                    "subnet {s} layer {l}: widths {input}×{output}"
                )));
            }
            let activation = match act {
                0 => Activation::Relu,
                1 => Activation::Tanh,
                other => {
                    return Err(CheckpointError::Corrupt(format!("unknown activation tag {other}")))
                }
            };
            let weight = (input as usize)
                .checked_mul(output as usize)
                .ok_or_else(|| CheckpointError::Corrupt("width overflow".into()))?;
            total_params = total_params
                .checked_add(weight + output as usize)
                .ok_or_else(|| CheckpointError::Corrupt("parameter count overflow".into()))?;
            layers.push(LayerSpec { input: input as usize, output: output as usize, activation });
        }
        archs.push(SubnetArch { layers });
    }
    let expected_bytes = total_params
        .checked_mul(4)
        .ok_or_else(|| CheckpointError::Corrupt("parameter byte count overflow".into()))?;
    if r.remaining() != expected_bytes {
        return Err(CheckpointError::Corrupt(format!(
            "descriptor implies {expected_bytes} parameter bytes, found {}",
            r.remaining()
        )));
    }

    let mut subnets = Vec::with_capacity(3);
    for arch in archs {
        let mut params = Vec::with_capacity(arch.layers.len() * 2);
        for layer in &arch.layers {
            let mut read_tensor = |shape: Vec<usize>| -> Result<Tensor<f32>, CheckpointError> {
                let numel: usize = shape.iter().product();
                let raw = r.take(numel * 4, "parameters")?;
                let data: Vec<f32> = raw
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                Ok(Tensor::new(shape, data).expect("sized read").with_grad())
            };
            params.push(read_tensor(vec![layer.input, layer.output])?);
            params.push(read_tensor(vec![layer.output])?);
        }
        let subnet = Subnet::from_params(arch, params).map_err(|e| match e {
            ModelError::BadArch(msg) => CheckpointError::ShapeMismatch(msg),
            other => CheckpointError::Corrupt(other.to_string()),
        })?;
        subnets.push(subnet);
    }
    let shader = subnets.pop().expect("three subnets");
    let direction_net = subnets.pop().expect("three subnets");
    let albedo_net = subnets.pop().expect("three subnets");
    Ok(ModelWeights { albedo_net, direction_net, shader, version })
}

pub fn save(weights: &ModelWeights, path: &Path) -> Result<(), ModelError> {
    std::fs::write(path, to_bytes(weights))
        .map_err(|e| CheckpointError::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ModelWeights, ModelError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CheckpointError::Io { path: path.to_path_buf(), source: e })?;
    Ok(from_bytes(&bytes)?)
}
