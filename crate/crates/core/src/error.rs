use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("{what} with N={n} exceeds the cap of {cap}")]
    Capacity {
        what: &'static str,
        n: usize,
        cap: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-physical density matrix: {0}")]
    NonPhysical(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
