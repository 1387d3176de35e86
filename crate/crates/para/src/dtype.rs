//! Encoding and decoding of tensor payloads for the supported storage
//! dtypes. Bytes are little-endian, matching the container format.

use half::{bf16, f16};
use para_core::StorageDtype;

pub fn dtype_from_str(s: &str) -> Option<StorageDtype> {
    match s {
        "F32" => Some(StorageDtype::F32),
        "F16" => Some(StorageDtype::F16),
        "BF16" => Some(StorageDtype::Bf16),
        _ => None,
    }
}

/// Downcast f64 values to the storage dtype and serialize.
pub fn encode(values: &[f64], dtype: StorageDtype) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * dtype.byte_width());
    match dtype {
        StorageDtype::F32 => {
            for &v in values {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        StorageDtype::F16 => {
            for &v in values {
                out.extend_from_slice(&f16::from_f64(v).to_le_bytes());
            }
        }
        StorageDtype::Bf16 => {
            for &v in values {
                out.extend_from_slice(&bf16::from_f64(v).to_le_bytes());
            }
        }
    }
    out
}

/// Upcast stored bytes to f64. The byte length must be a multiple of the
/// dtype width; the container layer validates that before calling.
pub fn decode(bytes: &[u8], dtype: StorageDtype) -> Vec<f64> {
    match dtype {
        StorageDtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        StorageDtype::F16 => bytes
            .chunks_exact(2)
            .map(|c| f16::from_le_bytes([c[0], c[1]]).to_f64())
            .collect(),
        StorageDtype::Bf16 => bytes
            .chunks_exact(2)
            .map(|c| bf16::from_le_bytes([c[0], c[1]]).to_f64())
            .collect(),
    }
}
