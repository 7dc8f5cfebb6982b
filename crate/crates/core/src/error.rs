use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("dataset error in {path}: {message}")]
    Dataset { path: PathBuf, message: String },

    #[error("empty mask: loss requires at least one selected node")]
    EmptyMask,

    #[error("parameter layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("empty record: at least one snapshot required")]
    EmptyRecord,

    #[error("bad snapshot file: {0}")]
    BadSnapshotFile(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
