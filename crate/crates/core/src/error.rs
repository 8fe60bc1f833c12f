use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("instance has {got} active features, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("feature {feature} in position {position} does not belong to field {position}")]
    NotFieldAligned { position: usize, feature: u32 },

    #[error("conversion type {conv_type} out of range (model has {num_types} types)")]
    ConvTypeOutOfRange { conv_type: u32, num_types: usize },

    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("batch is empty")]
    EmptyBatch,

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("AUC undefined: {positives} positives and {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },

    #[error("score {0} is not finite")]
    NonFiniteScore(f64),

    #[error("no conversion type has both classes present")]
    NoComputableType,

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("unknown conversion type `{0}`")]
    UnknownConvType(String),

    #[error("model kind {0} is not valid here")]
    WrongModelKind(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}
