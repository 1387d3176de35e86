//! Reader and writer for the tensor container format.
//!
//! Layout: an 8-byte little-endian unsigned header length, a UTF-8 JSON
//! header mapping tensor names to `{dtype, shape, data_offsets}`, then one
//! contiguous data buffer. Offsets are relative to the start of the buffer.
//! The parser is strict: offsets that overlap, exceed the buffer, or
//! disagree with `shape x dtype` are rejected, as is any malformed header.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dtype::dtype_from_str;
use crate::error::AdapterIoError;
use para_core::StorageDtype;

/// Sanity bound on the header; matches the reference implementation's cap.
const MAX_HEADER_LEN: usize = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct OwnedTensor {
    pub dtype: StorageDtype,
    pub shape: Vec<usize>,
    pub data: Vec<u8>,
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderEntry {
    dtype: String,
    shape: Vec<u64>,
    data_offsets: [u64; 2],
}

fn format_err(msg: impl Into<String>) -> AdapterIoError {
    AdapterIoError::Format(msg.into())
}

/// Parse and fully validate a container file.
pub fn parse(bytes: &[u8]) -> Result<BTreeMap<String, OwnedTensor>, AdapterIoError> {
    if bytes.len() < 8 {
        return Err(format_err("file shorter than the 8-byte header length"));
    }
    let header_len = u64::from_le_bytes(bytes[..8].try_into().expect("checked length"));
    let header_len = usize::try_from(header_len)
        .map_err(|_| format_err("header length does not fit in memory"))?;
    if header_len > MAX_HEADER_LEN {
        return Err(format_err(format!(
            "header length {header_len} exceeds limit"
        )));
    }
    let body = &bytes[8..];
    if header_len > body.len() {
        return Err(format_err(format!(
            "header length {header_len} exceeds file size {}",
            body.len()
        )));
    }
    let header_bytes = &body[..header_len];
    let buffer = &body[header_len..];

    let header_str = std::str::from_utf8(header_bytes)
        .map_err(|e| format_err(format!("header is not UTF-8: {e}")))?;
    let header: Value = serde_json::from_str(header_str)
        .map_err(|e| format_err(format!("header is not valid JSON: {e}")))?;
    let Value::Object(map) = header else {
        return Err(format_err("header JSON is not an object"));
    };

    let mut tensors = BTreeMap::new();
    let mut spans: Vec<(usize, usize, String)> = Vec::new();
    for (name, value) in map {
        if name == "__metadata__" {
            continue;
        }
        let entry: HeaderEntry = serde_json::from_value(value)
            .map_err(|e| format_err(format!("tensor '{name}': bad header entry: {e}")))?;
        let dtype = dtype_from_str(&entry.dtype).ok_or_else(|| {
            format_err(format!(
                "tensor '{name}': unsupported dtype '{}'",
                entry.dtype
            ))
        })?;

        let mut elements: usize = 1;
        let mut shape = Vec::with_capacity(entry.shape.len());
        for &d in &entry.shape {
            let d = usize::try_from(d)
                .map_err(|_| format_err(format!("tensor '{name}': shape entry too large")))?;
            elements = elements
                .checked_mul(d)
                .ok_or_else(|| format_err(format!("tensor '{name}': shape overflows")))?;
            shape.push(d);
        }

        let begin = usize::try_from(entry.data_offsets[0])
            .map_err(|_| format_err(format!("tensor '{name}': offset too large")))?;
        let end = usize::try_from(entry.data_offsets[1])
            .map_err(|_| format_err(format!("tensor '{name}': offset too large")))?;
        if begin > end {
            return Err(format_err(format!(
                "tensor '{name}': data_offsets are reversed"
            )));
        }
        if end > buffer.len() {
            return Err(format_err(format!(
                "tensor '{name}': data_offsets end {end} exceeds buffer size {}",
                buffer.len()
            )));
        }
        let expected = elements
            .checked_mul(dtype.byte_width())
            .ok_or_else(|| format_err(format!("tensor '{name}': byte size overflows")))?;
        if end - begin != expected {
            return Err(format_err(format!(
                "tensor '{name}': shape wants {expected} bytes but offsets span {}",
                end - begin
            )));
        }
        spans.push((begin, end, name.clone()));
        tensors.insert(
            name,
            OwnedTensor {
                dtype,
                shape,
                data: buffer[begin..end].to_vec(),
            },
        );
    }

    spans.sort();
    for pair in spans.windows(2) {
        if pair[0].1 > pair[1].0 {
            return Err(format_err(format!(
                "tensors '{}' and '{}' have overlapping data_offsets",
                pair[0].2, pair[1].2
            )));
        }
    }

    Ok(tensors)
}

/// Serialize tensors deterministically: names sorted, offsets contiguous in
/// name order, header padded with spaces to a multiple of 8 bytes.
pub fn serialize(tensors: &BTreeMap<String, OwnedTensor>) -> Vec<u8> {
    let mut header = BTreeMap::new();
    let mut offset = 0u64;
    for (name, t) in tensors {
        let end = offset + t.data.len() as u64;
        header.insert(
            name.clone(),
            HeaderEntry {
                dtype: t.dtype.as_str().to_string(),
                shape: t.shape.iter().map(|&d| d as u64).collect(),
                data_offsets: [offset, end],
            },
        );
        offset = end;
    }

    let mut header_json = serde_json::to_string(&header).expect("header serializes");
    while header_json.len() % 8 != 0 {
        header_json.push(' ');
    }

    let mut out = Vec::with_capacity(8 + header_json.len() + offset as usize);
    out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    out.extend_from_slice(header_json.as_bytes());
    for t in tensors.values() {
        out.extend_from_slice(&t.data);
    }
    out
}
