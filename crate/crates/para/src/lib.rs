//! File formats, pipeline drivers and CLI plumbing for adapter compression.
//!
//! The numeric kernels live in `para-core`; this crate adds everything that
//! touches the outside world: the tensor container format, the adapter
//! config JSON, parallel decomposition, analysis products, family
//! derivation and verification.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dtype;
pub mod error;
pub mod logging;
pub mod pipeline;
pub mod reports;
pub mod safetensors;

pub use checkpoint::{load_adapter, save_adapter, LoadedAdapter, ModuleTypeMap};
pub use config::AdapterConfig;
pub use error::{AdapterIoError, PipelineError};
pub use pipeline::{Policy, ReportFormat};
