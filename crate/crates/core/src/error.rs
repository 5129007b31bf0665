use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch at {layer}: {detail}")]
    Shape { layer: String, detail: String },

    #[error("invalid architecture: {0}")]
    Architecture(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stale forward cache: parameters changed since the forward pass")]
    StaleCache,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}, step {step}: {detail}")]
    Diverged { epoch: usize, step: usize, detail: String },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("slice sampler failed to shrink onto an acceptable point at coordinate {coordinate}")]
    SliceShrinkage { coordinate: usize },

    #[error("target density is identically zero")]
    ZeroDensity,

    #[error("bad file format: {0}")]
    Format(String),

    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    Checksum { stored: u64, computed: u64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Short machine-readable code, used by the CLI and the C ABI.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Shape { .. } | Error::Architecture(_) => "shape",
            Error::Config(_) | Error::InvalidArgument(_) => "usage",
            Error::StaleCache => "stale_cache",
            Error::NonFinite(_) | Error::Diverged { .. } => "numeric",
            Error::Empty(_) => "empty",
            Error::SliceShrinkage { .. } | Error::ZeroDensity => "sampler",
            Error::Format(_) | Error::Checksum { .. } => "format",
            Error::Io(_) => "io",
        }
    }

    /// Process exit status for the CLI: 2 for usage errors, 3 for I/O, 4 for
    /// malformed files, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.code() {
            "usage" => 2,
            "io" => 3,
            "format" => 4,
            _ => 1,
        }
    }

    pub(crate) fn shape(layer: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Shape { layer: layer.into(), detail: detail.into() }
    }
}
