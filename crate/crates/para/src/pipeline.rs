//! End-to-end commands: analyze, compress, family, verify, synth.
//!
//! Phase 1 (per-layer decomposition) is embarrassingly parallel and runs on
//! a scoped thread pool; each layer's result is placed by index, so the
//! output is byte-identical for any thread count. Everything after pooling
//! is a cheap sequential reduce.

use std::path::Path;

use serde::{Deserialize, Serialize};

use para_core::{
    compress, decompose_layer, drop_top_k_plan, frobenius_distance, generate_synthetic,
    local_uniform_plan, materialize_update, pool_spectrum, threshold_epsilon, threshold_gamma,
    AdapterSet, CompressedLayer, CompressionReport, GlobalSpectrum, KeepPlan, LayerType,
    SpectralDecomposition, SpectrumProfile, StorageDtype,
};

use crate::checkpoint::{load_adapter, save_adapter};
use crate::error::PipelineError;
use crate::logging::{log_debug, log_info};
use crate::reports;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    Gamma(f64),
    Epsilon(f64),
    Local(usize),
    TopK(usize),
}

impl Policy {
    /// Build from the CLI's (--policy, --value) pair. Ranges are checked
    /// here, before any file IO happens.
    pub fn from_cli(kind: &str, value: f64) -> Result<Self, PipelineError> {
        let usage = |msg: String| Err(PipelineError::Usage(msg));
        match kind {
            "gamma" => {
                if !(value > 0.0 && value <= 1.0) {
                    return usage(format!("--value for gamma must lie in (0, 1], got {value}"));
                }
                Ok(Policy::Gamma(value))
            }
            "epsilon" => {
                if !(value > 0.0 && value <= 1.0) {
                    return usage(format!(
                        "--value for epsilon must lie in (0, 1], got {value}"
                    ));
                }
                Ok(Policy::Epsilon(value))
            }
            "local" => {
                if value < 0.0 || value.fract() != 0.0 || value > u32::MAX as f64 {
                    return usage(format!(
                        "--value for local must be a non-negative integer, got {value}"
                    ));
                }
                Ok(Policy::Local(value as usize))
            }
            "topk" => {
                if value < 0.0 || value.fract() != 0.0 || value > u32::MAX as f64 {
                    return usage(format!(
                        "--value for topk must be a non-negative integer, got {value}"
                    ));
                }
                Ok(Policy::TopK(value as usize))
            }
            other => usage(format!("unknown policy '{other}'")),
        }
    }

    pub fn plan(&self, decomps: &[SpectralDecomposition]) -> Result<KeepPlan, PipelineError> {
        match *self {
            Policy::Gamma(g) => {
                let spectrum = pool_spectrum(decomps)?;
                Ok(threshold_gamma(&spectrum, g)?)
            }
            Policy::Epsilon(e) => {
                let spectrum = pool_spectrum(decomps)?;
                Ok(threshold_epsilon(&spectrum, e)?)
            }
            Policy::Local(r) => Ok(local_uniform_plan(decomps, r)),
            Policy::TopK(k) => Ok(drop_top_k_plan(decomps, k)?),
        }
    }

    /// Directory label for family children, e.g. `gamma_0.25`.
    pub fn label(&self) -> String {
        match *self {
            Policy::Gamma(v) => format!("gamma_{v}"),
            Policy::Epsilon(v) => format!("epsilon_{v}"),
            Policy::Local(v) => format!("local_{v}"),
            Policy::TopK(v) => format!("topk_{v}"),
        }
    }

    pub fn with_value(&self, value: f64) -> Result<Self, PipelineError> {
        let kind = match self {
            Policy::Gamma(_) => "gamma",
            Policy::Epsilon(_) => "epsilon",
            Policy::Local(_) => "local",
            Policy::TopK(_) => "topk",
        };
        Policy::from_cli(kind, value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Decompose every layer of the set, in set order, using up to `threads`
/// workers. Results are independent of the worker count.
pub fn decompose_set(
    set: &AdapterSet,
    threads: usize,
) -> Result<Vec<SpectralDecomposition>, PipelineError> {
    let layers = set.layers();
    let threads = threads.clamp(1, layers.len().max(1));
    log_debug!("decomposing {} layers on {} threads", layers.len(), threads);

    if threads == 1 {
        return layers
            .iter()
            .map(|l| decompose_layer(l).map_err(PipelineError::from))
            .collect();
    }

    let chunk = layers.len().div_ceil(threads);
    let mut slots: Vec<Option<Result<SpectralDecomposition, para_core::SpectralError>>> =
        (0..layers.len()).map(|_| None).collect();

    std::thread::scope(|scope| {
        for (layer_chunk, slot_chunk) in layers.chunks(chunk).zip(slots.chunks_mut(chunk)) {
            scope.spawn(move || {
                for (layer, slot) in layer_chunk.iter().zip(slot_chunk.iter_mut()) {
                    *slot = Some(decompose_layer(layer));
                }
            });
        }
    });

    slots
        .into_iter()
        .map(|slot| {
            slot.expect("every slot filled")
                .map_err(PipelineError::from)
        })
        .collect()
}

/// Rebuild an adapter set from compressed layers. Rank-0 layers are dropped
/// here and only survive in the report. The surviving factors are
/// scale-folded, so each output layer stores scale 1 (alpha = rank).
pub fn compressed_to_set(
    compressed: &[CompressedLayer],
    original: &AdapterSet,
) -> Result<AdapterSet, PipelineError> {
    let mut layers = Vec::new();
    for c in compressed {
        let (Some(b), Some(a)) = (&c.b_hat, &c.a_hat) else {
            continue;
        };
        let dtype = original
            .layers()
            .iter()
            .find(|l| l.key() == &c.key)
            .map_or(StorageDtype::F32, |l| l.storage_dtype());
        layers.push(para_core::AdapterLayer::new(
            c.key.clone(),
            b.clone(),
            a.clone(),
            1.0,
            dtype,
        )?);
    }
    Ok(AdapterSet::new(
        layers,
        original.init_rank(),
        original.alpha(),
    )?)
}

/// Compress with a ready plan and write the child directory plus report.
pub fn write_compressed(
    set: &AdapterSet,
    decomps: &[SpectralDecomposition],
    plan: &KeepPlan,
    out: &Path,
    format: ReportFormat,
) -> Result<CompressionReport, PipelineError> {
    let (layers, report) = compress(decomps, plan)?;
    let child = compressed_to_set(&layers, set)?;
    save_adapter(&child, out)?;
    let json =
        serde_json::to_string_pretty(&report).map_err(|e| PipelineError::Compute(e.to_string()))?;
    std::fs::write(out.join(REPORT_JSON), json + "\n")?;
    if format == ReportFormat::Csv {
        std::fs::write(out.join(REPORT_CSV), report.to_csv())?;
    }
    Ok(report)
}

pub fn run_compress(
    input: &Path,
    out: &Path,
    policy: Policy,
    format: ReportFormat,
    threads: usize,
) -> Result<CompressionReport, PipelineError> {
    let loaded = load_adapter(input)?;
    let decomps = decompose_set(&loaded.set, threads)?;
    let plan = policy.plan(&decomps)?;
    log_info!(
        "{}: keeping {} of {} singular values",
        policy.label(),
        plan.kept_total,
        loaded.set.initial_budget()
    );
    write_compressed(&loaded.set, &decomps, &plan, out, format)
}

/// Per-child outcome of a family run, keyed by the child's policy value.
pub type FamilyOutcome = (f64, Result<CompressionReport, PipelineError>);

/// One decomposition pass, one child per value.
pub fn run_family(
    input: &Path,
    out: &Path,
    policy: Policy,
    values: &[f64],
    format: ReportFormat,
    threads: usize,
) -> Result<Vec<FamilyOutcome>, PipelineError> {
    if values.is_empty() {
        return Err(PipelineError::Usage(
            "--values must not be empty".to_string(),
        ));
    }
    let increasing = values.windows(2).all(|w| w[0] < w[1]);
    let decreasing = values.windows(2).all(|w| w[0] > w[1]);
    if values.len() > 1 && !increasing && !decreasing {
        return Err(PipelineError::Usage(
            "--values must be strictly increasing or strictly decreasing".to_string(),
        ));
    }
    for &v in values {
        // Validate every child's parameters before any IO.
        policy.with_value(v)?;
    }

    let loaded = load_adapter(input)?;
    let decomps = decompose_set(&loaded.set, threads)?;

    let mut results = Vec::new();
    for &value in values {
        let child_policy = policy.with_value(value)?;
        let child_dir = out.join(child_policy.label());
        let result = child_policy
            .plan(&decomps)
            .and_then(|plan| write_compressed(&loaded.set, &decomps, &plan, &child_dir, format));
        if let Err(e) = &result {
            eprintln!("family child {value}: {e}");
        }
        results.push((value, result));
    }
    Ok(results)
}

pub fn run_analyze(
    input: &Path,
    out: &Path,
    bins: usize,
    threads: usize,
) -> Result<GlobalSpectrum, PipelineError> {
    let loaded = load_adapter(input)?;
    let decomps = decompose_set(&loaded.set, threads)?;
    let spectrum = pool_spectrum(&decomps)?;

    std::fs::create_dir_all(out)?;
    let json = serde_json::to_string_pretty(&reports::spectrum_json(&spectrum))
        .map_err(|e| PipelineError::Compute(e.to_string()))?;
    std::fs::write(out.join("spectrum.json"), json + "\n")?;
    std::fs::write(
        out.join("histogram.csv"),
        reports::histogram_csv(&spectrum, bins),
    )?;
    std::fs::write(
        out.join("energy_curve.csv"),
        reports::energy_curve_csv(&spectrum),
    )?;
    Ok(spectrum)
}

/// Per-layer verification outcome.
#[derive(Debug, Serialize, Deserialize)]
pub struct VerifyLayer {
    pub layer_index: usize,
    pub layer_type: LayerType,
    pub module_path: String,
    pub claimed_error: Option<f64>,
    pub measured_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub layers: Vec<VerifyLayer>,
}

fn reduced_precision(dtype: StorageDtype) -> bool {
    matches!(dtype, StorageDtype::F16 | StorageDtype::Bf16)
}

/// Measure each child layer's actual Frobenius error against the parent and
/// compare with the error the child's report claims. IO problems surface as
/// errors; mismatches come back in the report with `pass = false`.
pub fn run_verify(parent_dir: &Path, child_dir: &Path) -> Result<VerifyReport, PipelineError> {
    let parent = load_adapter(parent_dir)?.set;
    let child = load_adapter(child_dir)?.set;
    let report_bytes = std::fs::read(child_dir.join(REPORT_JSON)).map_err(|e| {
        PipelineError::Io(crate::error::AdapterIoError::Format(format!(
            "child report {} unreadable: {e}",
            child_dir.join(REPORT_JSON).display()
        )))
    })?;
    let report: CompressionReport = serde_json::from_slice(&report_bytes)
        .map_err(|e| PipelineError::Io(crate::error::AdapterIoError::Format(e.to_string())))?;

    let mut layers = Vec::new();
    let mut failed = 0usize;

    for parent_layer in parent.layers() {
        let key = parent_layer.key();
        let parent_update = materialize_update(parent_layer)?;
        let child_layer = child.find(key.layer_index, key.layer_type);

        let measured = match child_layer {
            Some(cl) => {
                let child_update = materialize_update(cl)?;
                frobenius_distance(&parent_update, &child_update)
                    .map_err(|e| PipelineError::Compute(e.to_string()))?
            }
            None => parent_update.frobenius_norm(),
        };

        let claimed = report
            .layer(key.layer_index, key.layer_type)
            .map(|r| r.frobenius_error);

        let mut tol_rel = 1e-6;
        if reduced_precision(parent_layer.storage_dtype())
            || child_layer.is_some_and(|cl| reduced_precision(cl.storage_dtype()))
        {
            tol_rel = 1e-2;
        }
        let scale = parent_update.frobenius_norm().max(1e-12);
        let pass = claimed.is_some_and(|c| (measured - c).abs() <= tol_rel * scale);
        if !pass {
            failed += 1;
        }
        layers.push(VerifyLayer {
            layer_index: key.layer_index,
            layer_type: key.layer_type,
            module_path: key.module_path.clone(),
            claimed_error: claimed,
            measured_error: measured,
            tolerance: tol_rel * scale,
            pass,
        });
    }

    // A child layer with no parent counterpart is corrupt output; measure
    // it against the zero update it should not be adding.
    for child_layer in child.layers() {
        let key = child_layer.key();
        if parent.find(key.layer_index, key.layer_type).is_none() {
            failed += 1;
            layers.push(VerifyLayer {
                layer_index: key.layer_index,
                layer_type: key.layer_type,
                module_path: key.module_path.clone(),
                claimed_error: None,
                measured_error: materialize_update(child_layer)?.frobenius_norm(),
                tolerance: 0.0,
                pass: false,
            });
        }
    }

    Ok(VerifyReport {
        pass: failed == 0,
        layers,
    })
}

impl VerifyReport {
    /// The failure error for a non-passing report, naming the first
    /// offending layer.
    pub fn failure(&self) -> Option<PipelineError> {
        if self.pass {
            return None;
        }
        let failed: Vec<&VerifyLayer> = self.layers.iter().filter(|l| !l.pass).collect();
        let first = failed.first().map_or(String::new(), |l| {
            format!(
                "; first: layer {} type {} ({})",
                l.layer_index, l.layer_type, l.module_path
            )
        });
        Some(PipelineError::VerifyFailed {
            failed: failed.len(),
            total: self.layers.len(),
            detail: first,
        })
    }
}

/// Parse a profile spec: `flat`, `power_law:<decay>` or
/// `bimodal:<big_count>,<big_val>,<small_val>`.
pub fn parse_profile(spec: &str) -> Result<SpectrumProfile, PipelineError> {
    let usage = |msg: String| PipelineError::Usage(msg);
    if spec == "flat" {
        return Ok(SpectrumProfile::Flat);
    }
    if let Some(rest) = spec.strip_prefix("power_law:") {
        let decay: f64 = rest
            .parse()
            .map_err(|_| usage(format!("bad power_law decay '{rest}'")))?;
        return Ok(SpectrumProfile::PowerLaw { decay });
    }
    if let Some(rest) = spec.strip_prefix("bimodal:") {
        let parts: Vec<&str> = rest.split(',').collect();
        if parts.len() != 3 {
            return Err(usage(format!(
                "bimodal wants big_count,big_val,small_val, got '{rest}'"
            )));
        }
        let big_count: usize = parts[0]
            .parse()
            .map_err(|_| usage(format!("bad bimodal big_count '{}'", parts[0])))?;
        let big_val: f64 = parts[1]
            .parse()
            .map_err(|_| usage(format!("bad bimodal big_val '{}'", parts[1])))?;
        let small_val: f64 = parts[2]
            .parse()
            .map_err(|_| usage(format!("bad bimodal small_val '{}'", parts[2])))?;
        return Ok(SpectrumProfile::Bimodal {
            big_count,
            big_val,
            small_val,
        });
    }
    Err(usage(format!(
        "unknown profile '{spec}'; expected flat, power_law:<decay> or bimodal:<n>,<big>,<small>"
    )))
}

pub fn run_synth(
    layers: usize,
    dims: (usize, usize),
    rank: usize,
    profile: &SpectrumProfile,
    seed: u64,
    out: &Path,
) -> Result<(), PipelineError> {
    let set = generate_synthetic(layers, dims, rank, profile, seed)?;
    save_adapter(&set, out)?;
    Ok(())
}
