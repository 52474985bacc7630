//! Checkpoint layout: `MANUCKP1`, u32 LE header length, JSON header
//! `{format_version, topology, seed, param_count}`, then every parameter as a
//! little-endian f64 in [`ToyModel::params`] order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelTopology, ToyModel};
use crate::error::{ManuError, Result};
use crate::fsutil::write_atomic;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MANUCKP1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointHeader {
    format_version: u32,
    topology: ModelTopology,
    seed: u64,
    param_count: usize,
}

pub fn encode_checkpoint(model: &ToyModel) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&CheckpointHeader {
        format_version: 1,
        topology: model.topology.clone(),
        seed: model.seed,
        param_count: model.param_count(),
    })?;
    let mut out = Vec::with_capacity(12 + header.len() + model.param_count() * 8);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for block in model.params() {
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ToyModel> {
    let corrupt = |m: &str| ManuError::MissingArtifact(format!("corrupt checkpoint: {m}"));
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = bytes.get(12..12 + hlen).ok_or_else(|| corrupt("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(body)?;
    if header.format_version != 1 {
        return Err(corrupt("unsupported format_version"));
    }
    let payload = &bytes[12 + hlen..];
    if payload.len() != header.param_count * 8 {
        return Err(corrupt("parameter block length does not match header"));
    }
    let mut model = ToyModel::new(header.topology, header.seed)?;
    let flat: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    model.set_flat_params(&flat)?;
    Ok(model)
}

pub fn save_checkpoint(model: &ToyModel, path: &Path) -> Result<()> {
    write_atomic(path, &encode_checkpoint(model)?)
}

pub fn load_checkpoint(path: &Path) -> Result<ToyModel> {
    let bytes = std::fs::read(path).map_err(|e| ManuError::io(path, e))?;
    decode_checkpoint(&bytes)
}
