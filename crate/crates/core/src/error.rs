use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input failed a domain check (unit norm, joint limits, counts, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A pose, trace or model was paired with the wrong kinematic chain.
    #[error("chain mismatch: {0}")]
    ChainMismatch(String),

    /// Tensor or parameter block shapes disagree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{path}: not a {kind} file (bad magic bytes)")]
    BadMagic { path: PathBuf, kind: &'static str },

    #[error("{path}: unsupported {kind} version {found} (expected {expected})")]
    Version { path: PathBuf, kind: &'static str, found: u32, expected: u32 },

    #[error("{path}: checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    Checksum { path: PathBuf, stored: u64, computed: u64 },

    #[error("{path}: truncated file ({found} bytes, expected {expected})")]
    Truncated { path: PathBuf, found: u64, expected: u64 },

    #[error("{path}: malformed content: {detail}")]
    Malformed { path: PathBuf, detail: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}, step {step}: {detail}")]
    Divergence { epoch: usize, step: usize, detail: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than the environment
    /// or a failed computation.
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::Io(e) => e.kind() == std::io::ErrorKind::NotFound,
            Error::NonFinite(_) | Error::Divergence { .. } => false,
            _ => true,
        }
    }
}
