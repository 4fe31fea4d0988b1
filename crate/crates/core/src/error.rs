use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = VistaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum VistaError {
    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("point is at or behind the camera plane (z = {z})")]
    BehindCamera { z: f64 },
    #[error("invalid depth {0}: depth must be positive and finite")]
    InvalidDepth(f64),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("sampling failed: {0}")]
    SamplingFailed(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("view synthesis requires a depth map")]
    MissingDepth,
    #[error("oracle backend requires a frozen scene")]
    OracleUnavailable,
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error("image dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("k = {k} exceeds the number of stored samples ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("dataset has no augmentation provenance: {0}")]
    MissingProvenance(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid policy file: {0}")]
    InvalidPolicyFile(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl VistaError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VistaError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures that come from the filesystem rather than from bad inputs.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            VistaError::Io { .. } | VistaError::Image { .. } | VistaError::Json { .. }
        )
    }
}
