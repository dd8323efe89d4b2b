use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate face: {0}")]
    DegenerateFace(String),

    #[error("crop rectangle lies entirely outside the frame (frame {frame})")]
    OutOfFrame { frame: usize },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate embedding: {0}")]
    DegenerateEmbedding(String),

    #[error("degenerate feature: {0}")]
    DegenerateFeature(String),

    #[error("failed to load provider `{name}`: {reason}")]
    ProviderLoad { name: String, reason: String },

    #[error("provider `{name}` produced an invalid embedding: {reason}")]
    ProviderFault { name: String, reason: String },

    #[error("pairing error: {0}")]
    Pairing(String),

    #[error("training diverged at epoch {epoch} (last good checkpoint: {last_good:?})")]
    TrainingFault {
        epoch: usize,
        last_good: Option<PathBuf>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("malformed {what}: {reason}")]
    Format { what: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(what: impl Into<String>, reason: impl ToString) -> Self {
        Error::Format {
            what: what.into(),
            reason: reason.to_string(),
        }
    }
}
