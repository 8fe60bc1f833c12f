//! Seeded synthetic impression and conversion logs with planted per-type
//! field-pair interactions.
//!
//! Every field value is drawn independently and uniformly. For a type `t`
//! the conversion logit is
//!
//! ```text
//! logit(base_rate[t]) + Σ effect · a[x_p] · b[x_q]
//! ```
//!
//! summed over the pairs planted for `t`, where `a` and `b` are balanced ±1
//! sign tables over the values of fields `p` and `q`. Each sign is ±1 with
//! equal frequency, so neither field alone is informative and the planted
//! pair carries all of the signal for its type.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::attribution::SECONDS_PER_DAY;
use super::records::{ConversionRecord, ImpressionRecord, LineRecord};
use super::split::PipelineConfig;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenField {
    pub name: String,
    pub cardinality: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedPair {
    /// Type name.
    pub conv_type: String,
    /// Field names.
    pub fields: [String; 2],
    pub effect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub type_names: Vec<String>,
    pub fields: Vec<GenField>,
    pub planted: Vec<PlantedPair>,
    /// Conversion probability of each type when every effect is zero.
    pub base_rates: Vec<f64>,
    /// Relative impression volume of each type.
    pub type_share: Vec<f64>,
    pub num_users: usize,
    pub lines_per_type: usize,
    pub days: usize,
    pub impressions_per_day: usize,
    /// Conversion delays are uniform on `[0, window_days]` days.
    pub window_days: i64,
    pub start_ts: i64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            type_names: vec!["Lead".into(), "Purchase".into()],
            fields: (0..8)
                .map(|k| GenField {
                    name: format!("f{k}"),
                    cardinality: 20,
                })
                .collect(),
            planted: Vec::new(),
            base_rates: vec![0.1, 0.1],
            type_share: vec![1.0, 1.0],
            num_users: 1_000_000,
            lines_per_type: 50,
            days: 9,
            impressions_per_day: 10_000,
            window_days: 6,
            start_ts: 1_500_000_000 - 1_500_000_000 % SECONDS_PER_DAY,
            seed: 0,
        }
    }
}

/// A planted pair resolved to indices, with its sign tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedSigns {
    pub conv_type: u32,
    pub fields: [usize; 2],
    pub effect: f64,
    pub signs: [Vec<i8>; 2],
}

/// Generator-side facts about each impression, in output order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub prob: Vec<f64>,
    pub converted: Vec<bool>,
    pub planted: Vec<PlantedSigns>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticLogs {
    pub impressions: Vec<ImpressionRecord>,
    pub conversions: Vec<ConversionRecord>,
    pub lines: Vec<LineRecord>,
    pub truth: GroundTruth,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn value_name(j: usize) -> String {
    format!("v{j}")
}

pub fn line_name(t: usize, j: usize) -> String {
    format!("line_{t}_{j}")
}

impl GenConfig {
    pub fn num_types(&self) -> usize {
        self.type_names.len()
    }

    fn type_index(&self, name: &str) -> Result<u32> {
        self.type_names
            .iter()
            .position(|n| n == name)
            .map(|t| t as u32)
            .ok_or_else(|| Error::UnknownConvType(name.to_string()))
    }

    fn field_index(&self, name: &str) -> Result<usize> {
        self.fields
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::UnknownField(name.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.num_types();
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if t == 0 || t > 256 {
            return bad(format!("need 1..=256 conversion types, got {t}"));
        }
        if self.base_rates.len() != t || self.type_share.len() != t {
            return bad("base_rates and type_share need one entry per type".into());
        }
        if self.type_share.iter().any(|&s| !(s >= 0.0 && s.is_finite()))
            || self.type_share.iter().sum::<f64>() <= 0.0
        {
            return bad("type_share must be nonnegative with a positive sum".into());
        }
        if self.fields.is_empty() || self.fields.iter().any(|f| f.cardinality == 0) {
            return bad("every field needs a positive cardinality".into());
        }
        if self.num_users == 0 || self.lines_per_type == 0 || self.days == 0 {
            return bad("num_users, lines_per_type and days must be positive".into());
        }
        if self.window_days < 0 {
            return bad("window_days must be >= 0".into());
        }
        for (i, r) in self.base_rates.iter().enumerate() {
            if !(*r > 0.0 && *r < 1.0) {
                return bad(format!("base rate of type {i} must be in (0, 1), got {r}"));
            }
        }
        // The most extreme logit any impression can reach.
        let mut reach = vec![0.0f64; t];
        for p in &self.planted {
            let ti = self.type_index(&p.conv_type)? as usize;
            let [a, b] = [self.field_index(&p.fields[0])?, self.field_index(&p.fields[1])?];
            if a == b {
                return bad(format!("planted pair repeats field `{}`", p.fields[0]));
            }
            if !p.effect.is_finite() {
                return bad("planted effect must be finite".into());
            }
            reach[ti] += p.effect.abs();
        }
        for (ti, r) in reach.iter().enumerate() {
            let base = logit(self.base_rates[ti]);
            for x in [base - r, base + r] {
                let p = sigmoid(x);
                if !(p > 0.0 && p < 1.0) {
                    return bad(format!(
                        "effects of type `{}` reach probability {p}",
                        self.type_names[ti]
                    ));
                }
            }
        }
        Ok(())
    }

    /// Pipeline settings matching this generator's fields, types and days.
    /// The last two days are validation and test.
    pub fn pipeline_config(&self) -> PipelineConfig {
        let d = self.days as i64;
        PipelineConfig {
            start_ts: self.start_ts,
            train_days: [0, (d - 2).max(1)],
            val_days: [(d - 2).max(1), (d - 1).max(2)],
            test_days: [(d - 1).max(2), d.max(3)],
            attribution_window_days: self.window_days,
            seed: self.seed,
            fields: self.fields.iter().map(|f| f.name.clone()).collect(),
            type_names: self.type_names.clone(),
            ..Default::default()
        }
    }

    fn resolve_planted(&self) -> Result<Vec<PlantedSigns>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(0);
        let mut table = |card: usize| {
            let mut s: Vec<i8> = (0..card).map(|j| if j % 2 == 0 { 1 } else { -1 }).collect();
            s.shuffle(&mut rng);
            s
        };
        self.planted
            .iter()
            .map(|p| {
                let fields = [self.field_index(&p.fields[0])?, self.field_index(&p.fields[1])?];
                let signs = [
                    table(self.fields[fields[0]].cardinality),
                    table(self.fields[fields[1]].cardinality),
                ];
                Ok(PlantedSigns {
                    conv_type: self.type_index(&p.conv_type)?,
                    fields,
                    effect: p.effect,
                    signs,
                })
            })
            .collect()
    }
}

struct DayOutput {
    impressions: Vec<ImpressionRecord>,
    conversions: Vec<ConversionRecord>,
    prob: Vec<f64>,
    converted: Vec<bool>,
}

fn generate_day(config: &GenConfig, planted: &[PlantedSigns], day: usize) -> DayOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(day as u64 + 1);
    let types = WeightedIndex::new(&config.type_share).expect("validated shares");
    let base: Vec<f64> = config.base_rates.iter().map(|&p| logit(p)).collect();
    let window = config.window_days * SECONDS_PER_DAY;
    let day_start = config.start_ts + day as i64 * SECONDS_PER_DAY;

    let mut rows = Vec::with_capacity(config.impressions_per_day);
    for _ in 0..config.impressions_per_day {
        let ts = day_start + rng.random_range(0..SECONDS_PER_DAY);
        let user = rng.random_range(0..config.num_users);
        let t = types.sample(&mut rng);
        let line = rng.random_range(0..config.lines_per_type);
        let values: Vec<usize> = config
            .fields
            .iter()
            .map(|f| rng.random_range(0..f.cardinality))
            .collect();
        let mut z = base[t];
        for p in planted.iter().filter(|p| p.conv_type as usize == t) {
            let a = p.signs[0][values[p.fields[0]]];
            let b = p.signs[1][values[p.fields[1]]];
            z += p.effect * f64::from(a * b);
        }
        let prob = sigmoid(z);
        let converted = rng.random::<f64>() < prob;
        let delay = rng.random_range(0..=window);
        rows.push((ts, user, t, line, values, prob, converted, delay));
    }
    // Stable sort keeps the draw order among equal timestamps.
    rows.sort_by_key(|r| r.0);

    let mut out = DayOutput {
        impressions: Vec::with_capacity(rows.len()),
        conversions: Vec::new(),
        prob: Vec::with_capacity(rows.len()),
        converted: Vec::with_capacity(rows.len()),
    };
    for (ts, user, t, line, values, prob, converted, delay) in rows {
        let user_id = format!("u{user}");
        let line_id = line_name(t, line);
        if converted {
            out.conversions.push(ConversionRecord {
                timestamp: ts + delay,
                user_id: user_id.clone(),
                line_id: line_id.clone(),
                conv_type: config.type_names[t].clone(),
            });
        }
        let fields: BTreeMap<String, String> = config
            .fields
            .iter()
            .zip(values)
            .map(|(f, v)| (f.name.clone(), value_name(v)))
            .collect();
        out.impressions.push(ImpressionRecord {
            timestamp: ts,
            user_id,
            line_id,
            fields,
        });
        out.prob.push(prob);
        out.converted.push(converted);
    }
    out
}

/// Generates logs for `config.days` days. Each day draws from its own
/// ChaCha8 stream; days run in parallel and are concatenated in day order.
/// The output does not depend on the thread count.
pub fn generate_synthetic(config: &GenConfig) -> Result<SyntheticLogs> {
    config.validate()?;
    let planted = config.resolve_planted()?;
    let days: Vec<DayOutput> = (0..config.days)
        .into_par_iter()
        .map(|d| generate_day(config, &planted, d))
        .collect();
    let mut logs = SyntheticLogs {
        impressions: Vec::new(),
        conversions: Vec::new(),
        lines: (0..config.num_types())
            .flat_map(|t| {
                (0..config.lines_per_type).map(move |j| LineRecord {
                    line_id: line_name(t, j),
                    conv_type: config.type_names[t].clone(),
                })
            })
            .collect(),
        truth: GroundTruth {
            prob: Vec::new(),
            converted: Vec::new(),
            planted,
        },
    };
    for d in days {
        logs.impressions.extend(d.impressions);
        logs.conversions.extend(d.conversions);
        logs.truth.prob.extend(d.prob);
        logs.truth.converted.extend(d.converted);
    }
    logs.conversions
        .sort_by(|a, b| a.timestamp.cmp(&b.timestamp));
    Ok(logs)
}
