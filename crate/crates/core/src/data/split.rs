//! Day-based train/validation/test layout and negative downsampling.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::attribution::{Label, SECONDS_PER_DAY};
use super::records::ImpressionRecord;
use crate::error::{Error, Result};
use crate::model::SparseInstance;

/// Dataset construction settings. Day ranges are half-open offsets from
/// `start_ts` in whole days.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub start_ts: i64,
    pub train_days: [i64; 2],
    pub val_days: [i64; 2],
    pub test_days: [i64; 2],
    pub attribution_window_days: i64,
    /// Probability of keeping a training negative.
    pub keep_prob: f64,
    /// Per-type overrides of `keep_prob`, keyed by type name.
    pub per_type_keep: BTreeMap<String, f64>,
    pub seed: u64,
    /// Training occurrences a value needs to get its own feature.
    pub min_feature_freq: usize,
    pub fields: Vec<String>,
    pub type_names: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            start_ts: 0,
            train_days: [0, 7],
            val_days: [7, 8],
            test_days: [8, 9],
            attribution_window_days: 6,
            keep_prob: 1.0,
            per_type_keep: BTreeMap::new(),
            seed: 0,
            min_feature_freq: 2,
            fields: Vec::new(),
            type_names: Vec::new(),
        }
    }
}

fn check_keep(p: f64, what: &str) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{what} must be in (0, 1], got {p}")))
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("train_days", self.train_days),
            ("val_days", self.val_days),
            ("test_days", self.test_days),
        ];
        for (name, [a, b]) in ranges {
            if a >= b {
                return Err(Error::InvalidConfig(format!("{name} is empty: [{a}, {b})")));
            }
        }
        if self.train_days[1] > self.val_days[0] || self.val_days[1] > self.test_days[0] {
            return Err(Error::InvalidConfig(
                "day ranges must be ordered train < val < test without overlap".into(),
            ));
        }
        if self.attribution_window_days < 0 {
            return Err(Error::InvalidConfig("attribution window must be >= 0".into()));
        }
        check_keep(self.keep_prob, "keep_prob")?;
        for (name, &p) in &self.per_type_keep {
            if !self.type_names.contains(name) {
                return Err(Error::UnknownConvType(name.clone()));
            }
            check_keep(p, &format!("per_type_keep[{name}]"))?;
        }
        if self.fields.is_empty() {
            return Err(Error::InvalidConfig("no fields configured".into()));
        }
        if self.type_names.is_empty() {
            return Err(Error::InvalidConfig("no conversion types configured".into()));
        }
        Ok(())
    }

    pub fn window_secs(&self) -> i64 {
        self.attribution_window_days * SECONDS_PER_DAY
    }

    /// Keep probability of each type id.
    pub fn keep_rates(&self) -> Vec<f64> {
        self.type_names
            .iter()
            .map(|n| self.per_type_keep.get(n).copied().unwrap_or(self.keep_prob))
            .collect()
    }

    pub fn split_of(&self, timestamp: i64) -> Option<Split> {
        let day = (timestamp - self.start_ts).div_euclid(SECONDS_PER_DAY);
        let inside = |[a, b]: [i64; 2]| (a..b).contains(&day);
        if inside(self.train_days) {
            Some(Split::Train)
        } else if inside(self.val_days) {
            Some(Split::Val)
        } else if inside(self.test_days) {
            Some(Split::Test)
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Impression indices per split, in input order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// Impressions outside every configured day range.
    pub dropped: usize,
}

impl SplitIndices {
    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

pub fn split_by_day(impressions: &[ImpressionRecord], config: &PipelineConfig) -> SplitIndices {
    let mut out = SplitIndices::default();
    for (i, imp) in impressions.iter().enumerate() {
        match config.split_of(imp.timestamp) {
            Some(Split::Train) => out.train.push(i),
            Some(Split::Val) => out.val.push(i),
            Some(Split::Test) => out.test.push(i),
            None => out.dropped += 1,
        }
    }
    out
}

/// Anything carrying a binary label and a conversion type.
pub trait Labeled {
    fn is_positive(&self) -> bool;
    fn conv_type(&self) -> u32;
}

impl Labeled for Label {
    fn is_positive(&self) -> bool {
        self.positive
    }
    fn conv_type(&self) -> u32 {
        self.conv_type
    }
}

impl Labeled for SparseInstance {
    fn is_positive(&self) -> bool {
        self.label
    }
    fn conv_type(&self) -> u32 {
        self.conv_type
    }
}

impl<L: Labeled> Labeled for (usize, L) {
    fn is_positive(&self) -> bool {
        self.1.is_positive()
    }
    fn conv_type(&self) -> u32 {
        self.1.conv_type()
    }
}

/// Keeps every positive and each negative independently with the keep
/// probability of its type (`keep_rates[conv_type]`). One uniform draw is
/// consumed per negative, in input order, from a ChaCha8 stream seeded with
/// `seed`. Meant for the training split only.
pub fn downsample_negatives<L: Labeled + Clone>(
    items: &[L],
    keep_rates: &[f64],
    seed: u64,
) -> Result<Vec<L>> {
    for &p in keep_rates {
        check_keep(p, "keep probability")?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        if item.is_positive() {
            out.push(item.clone());
            continue;
        }
        let t = item.conv_type() as usize;
        let p = *keep_rates.get(t).ok_or(Error::ConvTypeOutOfRange {
            conv_type: t as u32,
            num_types: keep_rates.len(),
        })?;
        // One draw per negative, also when p == 1.
        let u: f64 = rng.random();
        if u < p {
            out.push(item.clone());
        }
    }
    Ok(out)
}
