//! Multi-task field-weighted factorization machines (MT-FwFM) for predicting
//! several conversion types jointly, with the conversion-type-as-field
//! FM/FwFM baselines, a 3-way FwFM variant, mutual-information field-pair
//! analysis, log attribution and dataset construction, ranking metrics, and
//! parameter/operation-count accounting.

pub mod complexity;
pub mod data;
pub mod error;
pub mod metrics;
pub mod mi;
pub mod model;
pub mod scalar;
pub mod train;

pub use error::{Error, Result};
pub use metrics::{auc, report, MetricsReport, ScoredSample, TypeWeights};
pub use model::{
    FieldSchema, ModelConfig, ModelFile, ModelKind, ModelParams, Prediction, SparseInstance,
};
pub use train::{train, TrainConfig, TrainLog};
