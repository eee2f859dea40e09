//! Binary model container.
//!
//! Layout (little-endian): magic `PLNM`, `u32` version, `u32` joint count,
//! `u32` input layout, `u32` number of layer sizes `L`, `L × u32` sizes,
//! mean offset as 3 `f64`, then per layer the weights (row-major) and biases
//! as `f64`, then a SHA-256 digest of every preceding byte.

use std::path::Path;

use nalgebra::Vector3;
use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};

use super::model::{Layer, LifterInput, LifterModel};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"PLNM";
pub const MODEL_VERSION: u32 = 1;

pub fn to_bytes(model: &LifterModel) -> Vec<u8> {
    let mut buf = Vec::with_capacity(64 + model.parameter_count() * 8);
    buf.extend_from_slice(&MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.joint_count as u32).to_le_bytes());
    buf.extend_from_slice(&model.input.code().to_le_bytes());
    let sizes = model.layer_sizes();
    buf.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for s in &sizes {
        buf.extend_from_slice(&(*s as u32).to_le_bytes());
    }
    for v in model.mean_offset.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in model.parameters() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    buf
}

/// Parses a model, verifying the checksum. With `expected_joints`, a model for
/// a different joint count is rejected.
pub fn from_bytes(bytes: &[u8], expected_joints: Option<usize>) -> Result<LifterModel> {
    if bytes.len() < 4 + 32 || bytes[..4] != MODEL_MAGIC {
        return Err(Error::Corrupt("not a lifter model file".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Corrupt("lifter model checksum mismatch".into()));
    }
    let mut pos = 4;
    let mut take = |n: usize| -> Result<&[u8]> {
        if pos + n > body.len() {
            return Err(Error::Corrupt("lifter model is truncated".into()));
        }
        let s = &body[pos..pos + n];
        pos += n;
        Ok(s)
    };
    let read_u32 = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
    let read_f64 = |s: &[u8]| f64::from_le_bytes(s.try_into().unwrap());

    let version = read_u32(take(4)?);
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let joint_count = read_u32(take(4)?) as usize;
    if let Some(expected) = expected_joints {
        if expected != joint_count {
            return Err(Error::DimensionMismatch {
                expected,
                actual: joint_count,
            });
        }
    }
    let input = LifterInput::from_code(read_u32(take(4)?))?;
    let count = read_u32(take(4)?) as usize;
    if !(2..=64).contains(&count) {
        return Err(Error::Corrupt(format!("implausible layer count {count}")));
    }
    let mut sizes = Vec::with_capacity(count);
    for _ in 0..count {
        sizes.push(read_u32(take(4)?) as usize);
    }
    let mut mean_offset = Vector3::zeros();
    for i in 0..3 {
        mean_offset[i] = read_f64(take(8)?);
    }
    let mut layers = Vec::with_capacity(count - 1);
    for w in sizes.windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        let n = inputs
            .checked_mul(outputs)
            .ok_or_else(|| Error::Corrupt("layer size overflow".into()))?;
        let raw = take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Corrupt("layer size overflow".into()))?,
        )?;
        let weights = Array2::from_shape_vec(
            (outputs, inputs),
            raw.chunks_exact(8).map(read_f64).collect(),
        )
        .map_err(|e| Error::Corrupt(e.to_string()))?;
        let bias = Array1::from_iter(take(outputs * 8)?.chunks_exact(8).map(read_f64));
        layers.push(Layer { weights, bias });
    }
    if pos != body.len() {
        return Err(Error::Corrupt("trailing bytes in lifter model".into()));
    }
    let model = LifterModel {
        joint_count,
        input,
        layers,
        mean_offset,
    };
    model.validate()?;
    Ok(model)
}

pub fn save_model(model: &LifterModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path, expected_joints: Option<usize>) -> Result<LifterModel> {
    from_bytes(&std::fs::read(path)?, expected_joints)
}
