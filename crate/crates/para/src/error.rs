//! Error taxonomy for adapter IO and the CLI pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdapterIoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    /// Malformed container bytes, header JSON, or config JSON.
    #[error("format: {0}")]
    Format(String),
    /// Tensor pairs that do not line up (missing partner, shape or dtype
    /// mismatch).
    #[error("pairing: {0}")]
    Pairing(String),
    /// A module path that maps to none of the known layer types.
    #[error("unknown layer type for module path '{0}'")]
    UnknownLayerType(String),
    /// Every layer was pruned away; there is nothing to write.
    #[error("adapter set is empty; nothing to save")]
    EmptySet,
}

/// Pipeline-level error with the process exit code baked in.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] AdapterIoError),
    #[error("compute: {0}")]
    Compute(String),
    #[error("verification failed for {failed} of {total} layers{detail}")]
    VerifyFailed {
        failed: usize,
        total: usize,
        detail: String,
    },
}

impl PipelineError {
    /// 1 usage, 2 format/data, 3 verification failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            PipelineError::Io(_) | PipelineError::Compute(_) => 2,
            PipelineError::VerifyFailed { .. } => 3,
        }
    }
}

impl From<para_core::SpectralError> for PipelineError {
    fn from(e: para_core::SpectralError) -> Self {
        PipelineError::Compute(e.to_string())
    }
}

impl From<para_core::AllocationError> for PipelineError {
    fn from(e: para_core::AllocationError) -> Self {
        PipelineError::Compute(e.to_string())
    }
}

impl From<para_core::ReconstructError> for PipelineError {
    fn from(e: para_core::ReconstructError) -> Self {
        PipelineError::Compute(e.to_string())
    }
}

impl From<para_core::OracleError> for PipelineError {
    fn from(e: para_core::OracleError) -> Self {
        PipelineError::Compute(e.to_string())
    }
}

impl From<para_core::AdapterError> for PipelineError {
    fn from(e: para_core::AdapterError) -> Self {
        PipelineError::Compute(e.to_string())
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Io(AdapterIoError::Io(e))
    }
}
