//! Mutual information between field pairs and per-type conversion labels.

pub mod counts;
pub mod export;
pub mod table;

pub use counts::{ContingencyCounts, CountOptions, PairCounts, TypeCounts};
pub use export::{export_heatmaps, export_mi, fmt_sig6, matrix_csv, matrix_svg, pearson, HeatmapExport};
pub use table::{mutual_information, top_k_pairs, MiTable, RankedPair};
