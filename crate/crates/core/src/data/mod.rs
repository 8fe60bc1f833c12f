//! Log ingestion, last-touch attribution, day splits, negative
//! downsampling, encoding, dataset files and synthetic log generation.

pub mod attribution;
pub mod encode;
pub mod format;
pub mod pipeline;
pub mod records;
pub mod split;
pub mod synthetic;

pub use attribution::{attribute, Attribution, Label, LineTypes, SECONDS_PER_DAY};
pub use encode::{build_schema, encode, split_stats, FeatureStats, SplitStats};
pub use format::{load_instances, load_schema, save_instances, save_schema};
pub use pipeline::{prepare, PrepareReport, Prepared};
pub use records::{
    read_conversions, read_impressions, read_lines, read_ndjson, write_ndjson, ConversionRecord,
    ImpressionRecord, LineRecord, MISSING,
};
pub use split::{downsample_negatives, split_by_day, Labeled, PipelineConfig, Split, SplitIndices};
pub use synthetic::{generate_synthetic, GenConfig, GenField, GroundTruth, PlantedPair, SyntheticLogs};
