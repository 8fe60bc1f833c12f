//! Ranking metrics: pooled AUC, per-type AUC and the spend-weighted average.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SparseInstance;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub score: f64,
    pub label: bool,
    pub conv_type: u32,
}

/// Pairs model scores with the labels and types of the instances they score.
pub fn scored_samples(scores: &[f64], data: &[SparseInstance]) -> Vec<ScoredSample> {
    scores
        .iter()
        .zip(data)
        .map(|(&score, inst)| ScoredSample {
            score,
            label: inst.label,
            conv_type: inst.conv_type,
        })
        .collect()
}

/// Mann-Whitney AUC. Tied scores count one half, which equals the
/// average-rank formulation.
///
/// The statistic is accumulated as an exact integer `2U` over tie groups and
/// divided once at the end.
pub fn auc(samples: &[ScoredSample]) -> Result<f64> {
    let positives = samples.iter().filter(|s| s.label).count();
    let negatives = samples.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass {
            positives,
            negatives,
        });
    }
    if let Some(bad) = samples.iter().find(|s| !s.score.is_finite()) {
        return Err(Error::NonFiniteScore(bad.score));
    }
    let mut sorted: Vec<(f64, bool)> = samples.iter().map(|s| (s.score, s.label)).collect();
    sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    let mut twice_u: u128 = 0;
    let mut negatives_below: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let score = sorted[i].0;
        let (mut pos, mut neg) = (0u128, 0u128);
        // -0.0 and 0.0 compare equal, so group by `==` rather than bits.
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 {
                pos += 1;
            } else {
                neg += 1;
            }
            i += 1;
        }
        twice_u += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
    }
    Ok(twice_u as f64 / (2.0 * positives as f64 * negatives as f64))
}

/// Per-type weights `N_t` (spend, or sample counts when no spend is known).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeWeights(pub BTreeMap<u32, f64>);

impl TypeWeights {
    pub fn from_counts(samples: &[ScoredSample]) -> Self {
        let mut w = BTreeMap::new();
        for s in samples {
            *w.entry(s.conv_type).or_insert(0.0) += 1.0;
        }
        TypeWeights(w)
    }

    pub fn uniform(types: impl IntoIterator<Item = u32>) -> Self {
        TypeWeights(types.into_iter().map(|t| (t, 1.0)).collect())
    }

    pub fn get(&self, conv_type: u32) -> f64 {
        self.0.get(&conv_type).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.values().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidConfig("type weights must be finite and >= 0".into()));
        }
        if self.0.values().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidConfig("type weights sum to zero".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeCount {
    pub samples: usize,
    pub positives: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc_overall: f64,
    pub auc_per_type: BTreeMap<u32, f64>,
    pub auc_weighted: f64,
    pub counts: BTreeMap<u32, TypeCount>,
    pub weights: BTreeMap<u32, f64>,
    /// Types present in the data whose AUC is undefined (single class); they
    /// are left out of the weighted average entirely.
    pub excluded_types: Vec<u32>,
}

pub fn report(samples: &[ScoredSample], weights: &TypeWeights) -> Result<MetricsReport> {
    weights.validate()?;
    let mut by_type: BTreeMap<u32, Vec<ScoredSample>> = BTreeMap::new();
    for s in samples {
        by_type.entry(s.conv_type).or_default().push(*s);
    }

    let mut auc_per_type = BTreeMap::new();
    let mut counts = BTreeMap::new();
    let mut excluded_types = Vec::new();
    for (&t, group) in &by_type {
        let positives = group.iter().filter(|s| s.label).count();
        counts.insert(
            t,
            TypeCount {
                samples: group.len(),
                positives,
            },
        );
        match auc(group) {
            Ok(a) => {
                auc_per_type.insert(t, a);
            }
            Err(Error::SingleClass { .. }) => excluded_types.push(t),
            Err(e) => return Err(e),
        }
    }

    let (num, den) = auc_per_type
        .iter()
        .fold((0.0, 0.0), |(num, den), (&t, &a)| {
            let w = weights.get(t);
            (num + a * w, den + w)
        });
    if auc_per_type.is_empty() || den <= 0.0 {
        return Err(Error::NoComputableType);
    }

    Ok(MetricsReport {
        auc_overall: auc(samples)?,
        auc_weighted: num / den,
        weights: auc_per_type.keys().map(|&t| (t, weights.get(t))).collect(),
        auc_per_type,
        counts,
        excluded_types,
    })
}

impl MetricsReport {
    /// Fixed-order text table: one row per type, then overall and weighted.
    pub fn to_table(&self, type_names: Option<&[String]>) -> String {
        let name = |t: u32| {
            type_names
                .and_then(|n| n.get(t as usize).cloned())
                .unwrap_or_else(|| format!("type {t}"))
        };
        let mut out = String::new();
        let _ = writeln!(out, "{:<20} {:>10} {:>10} {:>8}", "type", "count", "positives", "AUC");
        for (&t, c) in &self.counts {
            let auc = self
                .auc_per_type
                .get(&t)
                .map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"));
            let _ = writeln!(
                out,
                "{:<20} {:>10} {:>10} {:>8}",
                name(t),
                c.samples,
                c.positives,
                auc
            );
        }
        let total: usize = self.counts.values().map(|c| c.samples).sum();
        let pos: usize = self.counts.values().map(|c| c.positives).sum();
        let _ = writeln!(
            out,
            "{:<20} {:>10} {:>10} {:>8.4}",
            "overall", total, pos, self.auc_overall
        );
        let _ = writeln!(out, "{:<20} {:>10} {:>10} {:>8.4}", "weighted", "", "", self.auc_weighted);
        out
    }
}
