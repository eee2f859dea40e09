use thiserror::Error;

/// Errors produced by the pose-lifting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// All joints of a 2D pose coincide, so the pose has no scale.
    #[error("degenerate pose: joint spread {spread:e} is below tolerance")]
    DegeneratePose { spread: f64 },

    /// A 3D joint lies on or behind the camera plane.
    #[error("joint {joint} is behind the camera (Z = {z})")]
    BehindCamera { joint: usize, z: f64 },

    /// Two collections that must agree in length (or a model and its input) do not.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Point sets without variance cannot be aligned.
    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    /// Mean-shift window contains no weight.
    #[error("mean-shift window at ({x}, {y}) has zero total weight")]
    EmptyWindow { x: f64, y: f64 },

    #[error("training dataset is empty")]
    EmptyDataset,

    /// Training diverged.
    #[error("non-finite loss at epoch {epoch}, step {step} (learning rate {learning_rate})")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        learning_rate: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Malformed or truncated file.
    #[error("corrupt data: {0}")]
    Corrupt(String),

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
