use thiserror::Error;

/// Errors surfaced by topology construction, data loading, configuration
/// validation and the simulation engine.
#[derive(Debug, Error)]
pub enum DiffnetError {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("edge probability {0} outside (0, 1)")]
    EdgeProbability(f64),

    #[error("failed to draw a connected graph after {0} attempts")]
    ConnectivityRetriesExhausted(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("csv error at {location}: {reason}")]
    CsvData { location: String, reason: String },

    #[error("non-finite value at agent {agent}, slot {slot}: {context}")]
    NonFinite {
        agent: usize,
        slot: usize,
        context: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DiffnetError>;
