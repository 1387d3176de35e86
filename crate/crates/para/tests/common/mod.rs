//! Shared helpers for the integration and acceptance suites.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use para::safetensors::OwnedTensor;
use para_core::{AdapterLayer, AdapterSet, LayerKey, LayerType, Matrix, StorageDtype};

// ---------------------------------------------------------------------------
// Deterministic RNG for fixtures.

pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn gaussian(&mut self) -> f64 {
        loop {
            let u = 2.0 * self.next_f64() - 1.0;
            let v = 2.0 * self.next_f64() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                return u * (-2.0 * s.ln() / s).sqrt();
            }
        }
    }

    pub fn usize_in(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() as usize) % (hi - lo + 1)
    }
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut TestRng) -> Matrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gaussian()).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// Random adapter layer with realistic module naming so it survives a
/// checkpoint round trip.
#[allow(clippy::too_many_arguments)]
pub fn random_layer(
    block: usize,
    layer_type: LayerType,
    d1: usize,
    d2: usize,
    rank: usize,
    scale: f64,
    dtype: StorageDtype,
    rng: &mut TestRng,
) -> AdapterLayer {
    let module = match layer_type {
        LayerType::Q => "self_attn.q_proj",
        LayerType::K => "self_attn.k_proj",
        LayerType::V => "self_attn.v_proj",
        LayerType::O => "self_attn.o_proj",
        LayerType::M1 => "mlp.up_proj",
        LayerType::M2 => "mlp.down_proj",
    };
    let key = LayerKey {
        layer_index: block + 1,
        layer_type,
        module_path: format!("base_model.model.layers.{block}.{module}"),
    };
    AdapterLayer::new(
        key,
        random_matrix(d1, rank, rng),
        random_matrix(rank, d2, rng),
        scale,
        dtype,
    )
    .unwrap()
}

/// A random heterogeneous adapter set with mixed dtypes and exact scales.
pub fn random_set(seed: u64) -> AdapterSet {
    let mut rng = TestRng::new(seed);
    let blocks = rng.usize_in(1, 3);
    let init_rank = rng.usize_in(2, 6);
    let alpha = (init_rank * 2) as f64;
    let dtypes = [StorageDtype::F32, StorageDtype::F16, StorageDtype::Bf16];
    let mut layers = Vec::new();
    for block in 0..blocks {
        for (t_idx, &layer_type) in LayerType::ALL.iter().enumerate() {
            if rng.next_f64() < 0.2 {
                continue; // not every block adapts every matrix
            }
            let d1 = rng.usize_in(8, 24);
            let d2 = rng.usize_in(8, 24);
            let rank = rng.usize_in(1, init_rank.min(d1).min(d2));
            // Exact binary scales keep alpha pattern round trips bit-stable.
            let scale = [1.0, 2.0, 0.5][(block + t_idx) % 3];
            let dtype = dtypes[rng.usize_in(0, 2)];
            layers.push(random_layer(
                block, layer_type, d1, d2, rank, scale, dtype, &mut rng,
            ));
        }
    }
    if layers.is_empty() {
        layers.push(random_layer(
            0,
            LayerType::Q,
            12,
            12,
            2,
            1.0,
            StorageDtype::F32,
            &mut rng,
        ));
    }
    AdapterSet::new(layers, init_rank, alpha).unwrap()
}

// ---------------------------------------------------------------------------
// Binary runner.

pub fn para_bin() -> &'static str {
    env!("CARGO_BIN_EXE_para")
}

pub fn run_para(args: &[&str]) -> Output {
    Command::new(para_bin())
        .args(args)
        .output()
        .expect("para binary runs")
}

pub fn run_para_ok(args: &[&str]) -> Output {
    let out = run_para(args);
    assert!(
        out.status.success(),
        "para {:?} failed: {}\n{}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

// ---------------------------------------------------------------------------
// Directory comparison.

fn walk_files(dir: &Path, base: &Path, out: &mut Vec<PathBuf>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            walk_files(&path, base, out);
        } else {
            out.push(path.strip_prefix(base).unwrap().to_path_buf());
        }
    }
}

/// Byte-exact comparison of two directory trees.
pub fn assert_dirs_identical(a: &Path, b: &Path) {
    let mut files_a = Vec::new();
    let mut files_b = Vec::new();
    walk_files(a, a, &mut files_a);
    walk_files(b, b, &mut files_b);
    files_a.sort();
    files_b.sort();
    assert_eq!(
        files_a,
        files_b,
        "{} and {} hold different files",
        a.display(),
        b.display()
    );
    for rel in &files_a {
        let bytes_a = std::fs::read(a.join(rel)).unwrap();
        let bytes_b = std::fs::read(b.join(rel)).unwrap();
        assert_eq!(
            bytes_a,
            bytes_b,
            "{} differs between {} and {}",
            rel.display(),
            a.display(),
            b.display()
        );
    }
}

// ---------------------------------------------------------------------------
// Minimal JSON-schema checker covering the subset the shipped schemas use:
// type (single or union), enum, required, properties, items, minimum.

pub fn schema_validate(schema: &Value, instance: &Value, path: &str) -> Result<(), String> {
    if let Some(allowed) = schema.get("enum") {
        let ok = allowed
            .as_array()
            .is_some_and(|options| options.iter().any(|o| o == instance));
        if !ok {
            return Err(format!("{path}: {instance} not in enum {allowed}"));
        }
    }

    if let Some(ty) = schema.get("type") {
        let names: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a.iter().filter_map(|v| v.as_str()).collect(),
            _ => return Err(format!("{path}: malformed schema type")),
        };
        let matches_one = names.iter().any(|name| type_matches(name, instance));
        if !matches_one {
            return Err(format!("{path}: {instance} is not of type {names:?}"));
        }
    }

    if let Some(min) = schema.get("minimum").and_then(Value::as_f64) {
        if let Some(x) = instance.as_f64() {
            if x < min {
                return Err(format!("{path}: {x} below minimum {min}"));
            }
        }
    }

    if let Some(required) = schema.get("required").and_then(Value::as_array) {
        if let Some(obj) = instance.as_object() {
            for name in required.iter().filter_map(Value::as_str) {
                if !obj.contains_key(name) {
                    return Err(format!("{path}: missing required key '{name}'"));
                }
            }
        }
    }

    if let (Some(props), Some(obj)) = (
        schema.get("properties").and_then(Value::as_object),
        instance.as_object(),
    ) {
        for (name, sub) in props {
            if let Some(value) = obj.get(name) {
                schema_validate(sub, value, &format!("{path}.{name}"))?;
            }
        }
    }

    if let (Some(items), Some(arr)) = (schema.get("items"), instance.as_array()) {
        for (i, value) in arr.iter().enumerate() {
            schema_validate(items, value, &format!("{path}[{i}]"))?;
        }
    }

    Ok(())
}

fn type_matches(name: &str, instance: &Value) -> bool {
    match name {
        "object" => instance.is_object(),
        "array" => instance.is_array(),
        "string" => instance.is_string(),
        "boolean" => instance.is_boolean(),
        "null" => instance.is_null(),
        "integer" => instance.as_i64().is_some() || instance.as_u64().is_some(),
        "number" => instance.is_number(),
        _ => false,
    }
}

pub fn load_schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(name);
    serde_json::from_slice(&std::fs::read(&path).unwrap_or_else(|e| {
        panic!("schema {} unreadable: {e}", path.display());
    }))
    .expect("schema parses")
}

pub fn assert_schema_valid(schema_name: &str, json_path: &Path) {
    let schema = load_schema(schema_name);
    let instance: Value = serde_json::from_slice(&std::fs::read(json_path).expect("json readable"))
        .expect("json parses");
    if let Err(e) = schema_validate(&schema, &instance, "$") {
        panic!("{} violates {schema_name}: {e}", json_path.display());
    }
}

// ---------------------------------------------------------------------------
// Header corruption generator shared by the fuzz and acceptance suites.

/// A well-formed container to corrupt.
pub fn valid_container() -> Vec<u8> {
    let mut tensors = BTreeMap::new();
    tensors.insert(
        "base_model.model.layers.0.self_attn.q_proj.lora_A.weight".to_string(),
        OwnedTensor {
            dtype: StorageDtype::F32,
            shape: vec![2, 4],
            data: vec![1u8; 32],
        },
    );
    tensors.insert(
        "base_model.model.layers.0.self_attn.q_proj.lora_B.weight".to_string(),
        OwnedTensor {
            dtype: StorageDtype::F32,
            shape: vec![5, 2],
            data: vec![2u8; 40],
        },
    );
    para::safetensors::serialize(&tensors)
}

/// Hand-rolled container from a raw header string and a buffer size.
pub fn container_from_header(header: &str, buffer_len: usize) -> Vec<u8> {
    let mut bytes = (header.len() as u64).to_le_bytes().to_vec();
    bytes.extend_from_slice(header.as_bytes());
    bytes.extend(std::iter::repeat_n(0u8, buffer_len));
    bytes
}

/// Produce one corrupted container; every class is invalid by construction.
pub fn corrupt_container(base: &[u8], rng: &mut TestRng) -> Vec<u8> {
    let header_len = u64::from_le_bytes(base[..8].try_into().unwrap()) as usize;
    match rng.usize_in(0, 11) {
        // Truncation somewhere before the end.
        0 => {
            let cut = rng.usize_in(0, base.len() - 1);
            base[..cut].to_vec()
        }
        // Random header length field (never the true one).
        1 => {
            let mut bytes = base.to_vec();
            let mut fake = rng.next_u64();
            if fake == header_len as u64 {
                fake ^= 1;
            }
            bytes[..8].copy_from_slice(&fake.to_le_bytes());
            bytes
        }
        // Header length cutting into the JSON body.
        2 => {
            let mut bytes = base.to_vec();
            let cut = rng.usize_in(1, header_len.saturating_sub(8).max(1)) as u64;
            bytes[..8].copy_from_slice(&cut.to_le_bytes());
            bytes
        }
        // Invalid UTF-8 inside the header.
        3 => {
            let mut bytes = base.to_vec();
            let pos = 8 + rng.usize_in(0, header_len - 1);
            bytes[pos] = 0xFF;
            bytes
        }
        // Overlapping offsets.
        4 => container_from_header(
            r#"{"a":{"dtype":"F32","shape":[2],"data_offsets":[0,8]},"b":{"dtype":"F32","shape":[2],"data_offsets":[4,12]}}"#,
            12,
        ),
        // Offsets past the buffer.
        5 => container_from_header(
            r#"{"a":{"dtype":"F32","shape":[8],"data_offsets":[0,32]}}"#,
            16,
        ),
        // Shape and offsets disagree.
        6 => container_from_header(
            r#"{"a":{"dtype":"F32","shape":[3],"data_offsets":[0,8]}}"#,
            8,
        ),
        // Unsupported dtype.
        7 => container_from_header(
            r#"{"a":{"dtype":"F64","shape":[2],"data_offsets":[0,16]}}"#,
            16,
        ),
        // Reversed offsets.
        8 => container_from_header(
            r#"{"a":{"dtype":"F32","shape":[2],"data_offsets":[8,0]}}"#,
            8,
        ),
        // Header is not an object.
        9 => container_from_header(r#"[1, 2, 3]"#, 0),
        // Wrong offsets arity.
        10 => container_from_header(
            r#"{"a":{"dtype":"F32","shape":[2],"data_offsets":[0,4,8]}}"#,
            8,
        ),
        // Negative shape entry.
        _ => container_from_header(
            r#"{"a":{"dtype":"F32","shape":[-2],"data_offsets":[0,8]}}"#,
            8,
        ),
    }
}
