//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong between loading a graph and writing a report.
#[derive(Debug, Error)]
pub enum GraphCubeError {
    /// Too many unparseable lines, or a structurally broken input file.
    #[error("parse failed: {0}")]
    Parse(String),

    /// A fact set selector matched nothing.
    #[error("candidate fact set '{0}' is empty")]
    EmptyFactSet(String),

    /// An attribute or spec referenced something the store does not have.
    #[error("unknown {kind}: {name}")]
    Unknown { kind: &'static str, name: String },

    /// The cube cannot fit the memory budget even at partition extent 1.
    #[error("memory budget of {budget} cells cannot be met: minimum plan needs {needed}")]
    Budget { budget: u64, needed: u64 },

    /// Bad run configuration (file or flags).
    #[error("config: {0}")]
    Config(String),

    /// An engine-vs-oracle comparison found disagreeing rows.
    #[error("oracle check: {0}")]
    Check(String),

    /// Malformed serialized bitmap.
    #[error("bitmap decode: {0}")]
    BitmapDecode(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
