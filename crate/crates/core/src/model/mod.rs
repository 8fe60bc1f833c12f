//! Multi-field categorical data model and forward scoring.

pub mod config;
pub mod forward;
pub mod instance;
pub mod io;
pub mod params;
pub mod schema;

pub use config::{pair_index, pairs, ModelConfig, ModelKind};
pub use forward::{
    phi_3way_ctf, phi_fwfm, phi_mt_fwfm, predict, sigmoid, Prediction, Terms, PROB_EPS,
};
pub use instance::{Rows, SparseInstance};
pub use io::{ModelFile, FORMAT_VERSION};
pub use params::ModelParams;
pub use schema::{FieldSchema, SchemaDigest, CONV_TYPE_FIELD};
