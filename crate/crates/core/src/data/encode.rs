//! Dictionary building and one-hot-per-field encoding.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::attribution::Label;
use super::records::ImpressionRecord;
use crate::error::{Error, Result};
use crate::model::{FieldSchema, SparseInstance};

fn check_fields(record: &ImpressionRecord, fields: &[String]) -> Result<()> {
    for name in record.fields.keys() {
        if !fields.iter().any(|f| f == name) {
            return Err(Error::UnknownField(name.clone()));
        }
    }
    Ok(())
}

/// Builds the dictionaries from training records.
///
/// A value gets its own feature when it occurs at least `min_freq` times;
/// rarer values share the field's OOV feature. Values are ordered
/// lexicographically inside each field. The schema depends only on the
/// multiset of training values.
pub fn build_schema(
    records: &[&ImpressionRecord],
    fields: &[String],
    type_names: &[String],
    min_freq: usize,
) -> Result<FieldSchema> {
    let mut counts: Vec<HashMap<&str, usize>> = vec![HashMap::new(); fields.len()];
    for r in records {
        check_fields(r, fields)?;
        for (k, name) in fields.iter().enumerate() {
            *counts[k].entry(r.value(name)).or_default() += 1;
        }
    }
    let values = counts
        .into_iter()
        .map(|c| {
            let mut v: Vec<String> = c
                .into_iter()
                .filter(|&(_, n)| n >= min_freq.max(1))
                .map(|(s, _)| s.to_string())
                .collect();
            v.sort();
            v
        })
        .collect();
    FieldSchema::new(fields.to_vec(), values, type_names.to_vec())
}

/// Encodes labeled records against `schema`. Unseen values map to the
/// field's OOV feature. With `ctf`, the conversion-type feature is appended
/// as an extra field.
pub fn encode(
    records: &[&ImpressionRecord],
    labels: &[Label],
    schema: &FieldSchema,
    ctf: bool,
) -> Result<Vec<SparseInstance>> {
    if records.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: records.len(),
            got: labels.len(),
        });
    }
    let fields = schema.fields();
    records
        .iter()
        .zip(labels)
        .map(|(r, l)| {
            check_fields(r, fields)?;
            if l.conv_type as usize >= schema.num_types() {
                return Err(Error::ConvTypeOutOfRange {
                    conv_type: l.conv_type,
                    num_types: schema.num_types(),
                });
            }
            let active = fields
                .iter()
                .enumerate()
                .map(|(k, name)| schema.feature_index(k, r.value(name)))
                .collect();
            let inst = SparseInstance::new(active, l.conv_type, l.positive);
            Ok(if ctf { schema.augment_ctf(&inst) } else { inst })
        })
        .collect()
}

/// Sample and feature counts of one group of encoded instances.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub samples: usize,
    pub positives: usize,
    /// Distinct in-vocabulary features that occur.
    pub features: usize,
    /// Fraction of field slots that fell back to OOV.
    pub oov_rate: f64,
}

impl FeatureStats {
    pub fn cvr(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.positives as f64 / self.samples as f64
        }
    }
}

/// Counts for one split, overall and per type.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub overall: FeatureStats,
    pub per_type: BTreeMap<String, FeatureStats>,
}

pub fn split_stats(data: &[SparseInstance], schema: &FieldSchema) -> SplitStats {
    let n = schema.num_fields();
    let stats = |filter: &dyn Fn(&SparseInstance) -> bool| {
        let mut seen = BTreeSet::new();
        let (mut samples, mut positives, mut oov) = (0, 0, 0usize);
        for inst in data.iter().filter(|i| filter(i)) {
            samples += 1;
            positives += inst.label as usize;
            for &f in &inst.active[..n.min(inst.active.len())] {
                if schema.is_oov(f) {
                    oov += 1;
                } else {
                    seen.insert(f);
                }
            }
        }
        FeatureStats {
            samples,
            positives,
            features: seen.len(),
            oov_rate: if samples == 0 {
                0.0
            } else {
                oov as f64 / (samples * n) as f64
            },
        }
    };
    SplitStats {
        overall: stats(&|_| true),
        per_type: schema
            .type_names()
            .iter()
            .enumerate()
            .map(|(t, name)| (name.clone(), stats(&|i| i.conv_type as usize == t)))
            .collect(),
    }
}
