//! Binary trace file format (all integers little-endian):
//!
//! ```text
//! magic        8 bytes   "MANUTRC1"
//! header_len   u32
//! header       header_len bytes of UTF-8 JSON
//! payload      per layer in header order, row-major f32 samples x width
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActivationTrace, DatasetTag, LayerSpec, Modality, Topology};
use crate::error::{ManuError, Result, TraceFormatError};
use crate::fsutil::write_atomic;

pub const TRACE_MAGIC: &[u8; 8] = b"MANUTRC1";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceHeader {
    format_version: u32,
    dataset_tag: DatasetTag,
    modality: Modality,
    sample_ids: Vec<String>,
    layers: Vec<LayerSpec>,
}

pub fn encode_trace(trace: &ActivationTrace) -> Result<Vec<u8>> {
    trace.check()?;
    let header = TraceHeader {
        format_version: FORMAT_VERSION,
        dataset_tag: trace.dataset_tag,
        modality: trace.modality,
        sample_ids: trace.sample_ids.clone(),
        layers: trace.topology.layers.clone(),
    };
    let header = serde_json::to_vec(&header)?;
    let payload_len: usize = trace.values.iter().map(|b| b.len() * 4).sum();
    let mut out = Vec::with_capacity(12 + header.len() + payload_len);
    out.extend_from_slice(TRACE_MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for block in &trace.values {
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_trace(bytes: &[u8]) -> Result<ActivationTrace> {
    if bytes.len() < TRACE_MAGIC.len() {
        return Err(TraceFormatError::Truncated("file shorter than magic".into()).into());
    }
    if &bytes[..8] != TRACE_MAGIC {
        return Err(TraceFormatError::BadMagic.into());
    }
    if bytes.len() < 12 {
        return Err(TraceFormatError::Truncated("missing header length".into()).into());
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header_end = 12usize
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| {
            TraceFormatError::Truncated(format!(
                "header declares {header_len} bytes, {} available",
                bytes.len() - 12
            ))
        })?;
    let header: TraceHeader = serde_json::from_slice(&bytes[12..header_end])
        .map_err(|e| TraceFormatError::BadHeader(e.to_string()))?;
    if header.format_version != FORMAT_VERSION {
        return Err(TraceFormatError::BadHeader(format!(
            "unsupported format_version {}",
            header.format_version
        ))
        .into());
    }

    let rows = header.sample_ids.len();
    let payload = &bytes[header_end..];
    let expected: usize = header
        .layers
        .iter()
        .map(|l| rows * l.width as usize * 4)
        .sum();
    if payload.len() != expected {
        return Err(TraceFormatError::ShapeMismatch {
            expected,
            found: payload.len(),
        }
        .into());
    }

    let mut values = Vec::with_capacity(header.layers.len());
    let mut offset = 0;
    for layer in &header.layers {
        let n = rows * layer.width as usize;
        let block: Vec<f32> = payload[offset..offset + n * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        offset += n * 4;
        values.push(block);
    }

    ActivationTrace::new(
        header.dataset_tag,
        header.modality,
        header.sample_ids,
        Topology::new(header.layers),
        values,
    )
}

pub fn load_trace(path: &Path) -> Result<ActivationTrace> {
    let bytes = std::fs::read(path).map_err(|e| ManuError::io(path, e))?;
    decode_trace(&bytes)
}

pub fn save_trace(trace: &ActivationTrace, path: &Path) -> Result<()> {
    let bytes = encode_trace(trace)?;
    write_atomic(path, &bytes)
}
