use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::attribution::{attribute, Label, LineTypes};
use super::encode::{build_schema, encode, split_stats, SplitStats};
use super::records::{ConversionRecord, ImpressionRecord, LineRecord};
use super::split::{downsample_negatives, split_by_day, PipelineConfig, Split};
use crate::error::Result;
use crate::model::{FieldSchema, SparseInstance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepareReport {
    pub impressions: usize,
    pub conversions: usize,
    pub attributed_positives: usize,
    pub unmatched_conversions: usize,
    pub type_mismatches: usize,
    pub outside_days: usize,
    pub train_before_downsampling: usize,
    pub splits: BTreeMap<Split, SplitStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prepared {
    pub schema: FieldSchema,
    pub train: Vec<SparseInstance>,
    pub val: Vec<SparseInstance>,
    pub test: Vec<SparseInstance>,
    pub report: PrepareReport,
}

impl Prepared {
    pub fn split(&self, split: Split) -> &[SparseInstance] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Attribution, day split, training-only negative downsampling, dictionary
/// building on the training split, and encoding of all three splits.
/// Instances are encoded without the conversion-type field.
pub fn prepare(
    impressions: &[ImpressionRecord],
    conversions: &[ConversionRecord],
    lines: &[LineRecord],
    config: &PipelineConfig,
) -> Result<Prepared> {
    config.validate()?;
    let line_types = LineTypes::new(lines, &config.type_names)?;
    let attribution = attribute(
        impressions,
        conversions,
        &line_types,
        &config.type_names,
        config.window_secs(),
    )?;
    let splits = split_by_day(impressions, config);

    let labeled = |idx: &[usize]| -> Vec<(usize, Label)> {
        idx.iter().map(|&i| (i, attribution.labels[i])).collect()
    };
    let train_all = labeled(&splits.train);
    let train = downsample_negatives(&train_all, &config.keep_rates(), config.seed)?;

    let records_of = |items: &[(usize, Label)]| -> Vec<&ImpressionRecord> {
        items.iter().map(|&(i, _)| &impressions[i]).collect()
    };
    let labels_of = |items: &[(usize, Label)]| -> Vec<Label> {
        items.iter().map(|&(_, l)| l).collect()
    };
    let train_records = records_of(&train);
    let schema = build_schema(
        &train_records,
        &config.fields,
        &config.type_names,
        config.min_feature_freq,
    )?;
    let encode_split = |items: &[(usize, Label)]| {
        encode(&records_of(items), &labels_of(items), &schema, false)
    };
    let train = encode_split(&train)?;
    let val = encode_split(&labeled(&splits.val))?;
    let test = encode_split(&labeled(&splits.test))?;

    let report = PrepareReport {
        impressions: impressions.len(),
        conversions: conversions.len(),
        attributed_positives: attribution.labels.iter().filter(|l| l.positive).count(),
        unmatched_conversions: attribution.unmatched_conversions,
        type_mismatches: attribution.type_mismatches,
        outside_days: splits.dropped,
        train_before_downsampling: train_all.len(),
        splits: [
            (Split::Train, split_stats(&train, &schema)),
            (Split::Val, split_stats(&val, &schema)),
            (Split::Test, split_stats(&test, &schema)),
        ]
        .into(),
    };
    Ok(Prepared {
        schema,
        train,
        val,
        test,
        report,
    })
}
