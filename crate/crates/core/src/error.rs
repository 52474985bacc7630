use std::path::PathBuf;

use thiserror::Error;

use crate::trace::NeuronId;

/// Failures while decoding a trace file. Each variant is a distinct load error.
#[derive(Debug, Error)]
pub enum TraceFormatError {
    #[error("bad magic header (expected MANUTRC1)")]
    BadMagic,
    #[error("truncated trace file: {0}")]
    Truncated(String),
    #[error("malformed trace header: {0}")]
    BadHeader(String),
    #[error("payload shape mismatch: expected {expected} bytes, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite activation in layer {layer} at row {row}, column {column}")]
    NonFinite {
        layer: usize,
        row: usize,
        column: usize,
    },
}

#[derive(Debug, Error)]
pub enum ManuError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    TraceFormat(#[from] TraceFormatError),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("topology mismatch: {0}")]
    TopologyMismatch(String),
    #[error("dataset tag mismatch: {0}")]
    TagMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("alpha {0} outside the open interval (0, 100)")]
    AlphaOutOfRange(f64),
    #[error("neuron {0} is not part of the topology")]
    NeuronOutOfTopology(NeuronId),
    #[error("numeric failure during {stage}: {detail}")]
    Numeric { stage: String, detail: String },
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
}

pub type Result<T, E = ManuError> = std::result::Result<T, E>;

/// Process exit status classes used by the command-line front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Config,
    Numeric,
    Io,
}

impl ExitClass {
    pub fn code(self) -> i32 {
        match self {
            ExitClass::Config => 2,
            ExitClass::Numeric => 3,
            ExitClass::Io => 4,
        }
    }
}

impl ManuError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ManuError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn numeric(stage: impl Into<String>, detail: impl Into<String>) -> Self {
        ManuError::Numeric {
            stage: stage.into(),
            detail: detail.into(),
        }
    }

    pub fn exit_class(&self) -> ExitClass {
        match self {
            ManuError::Io { .. }
            | ManuError::Json(_)
            | ManuError::TraceFormat(_)
            | ManuError::MissingArtifact(_) => ExitClass::Io,
            ManuError::Numeric { .. } => ExitClass::Numeric,
            ManuError::EmptyInput(_)
            | ManuError::TopologyMismatch(_)
            | ManuError::TagMismatch(_)
            | ManuError::InvalidConfig(_)
            | ManuError::AlphaOutOfRange(_)
            | ManuError::NeuronOutOfTopology(_) => ExitClass::Config,
        }
    }
}
