//! Last-touch attribution of conversions to impressions.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::records::{ConversionRecord, ImpressionRecord, LineRecord};
use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Line id to conversion-type id.
#[derive(Clone, Debug, Default)]
pub struct LineTypes(HashMap<String, u32>);

impl LineTypes {
    pub fn new(lines: &[LineRecord], type_names: &[String]) -> Result<Self> {
        let mut map = HashMap::with_capacity(lines.len());
        for l in lines {
            let t = type_names
                .iter()
                .position(|n| *n == l.conv_type)
                .ok_or_else(|| Error::UnknownConvType(l.conv_type.clone()))?;
            if let Some(prev) = map.insert(l.line_id.clone(), t as u32) {
                if prev != t as u32 {
                    return Err(Error::format(
                        "line table",
                        format!("line `{}` has more than one conversion type", l.line_id),
                    ));
                }
            }
        }
        Ok(LineTypes(map))
    }

    pub fn get(&self, line_id: &str) -> Option<u32> {
        self.0.get(line_id).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub positive: bool,
    /// The impression's line type.
    pub conv_type: u32,
    /// Timestamp of the conversion credited to this impression.
    pub conversion_ts: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribution {
    /// One label per input impression, in input order.
    pub labels: Vec<Label>,
    /// Conversions with no impression from the same user and line inside the window.
    pub unmatched_conversions: usize,
    /// Conversions whose type differs from their line's type; ignored.
    pub type_mismatches: usize,
}

/// Labels impressions with last-touch attribution.
///
/// A conversion credits the latest impression with the same `(user_id,
/// line_id)` such that `impression_ts <= conversion_ts <= impression_ts +
/// window_secs`; among equal timestamps the later input record is latest.
/// An impression credited more than once stays a single positive and keeps
/// the earliest conversion's timestamp. Groups of `(user_id, line_id)` are
/// processed independently and in parallel.
pub fn attribute(
    impressions: &[ImpressionRecord],
    conversions: &[ConversionRecord],
    lines: &LineTypes,
    type_names: &[String],
    window_secs: i64,
) -> Result<Attribution> {
    if window_secs < 0 {
        return Err(Error::InvalidConfig("attribution window must be >= 0".into()));
    }
    let mut labels = Vec::with_capacity(impressions.len());
    for imp in impressions {
        let conv_type = lines.get(&imp.line_id).ok_or_else(|| {
            Error::format(
                "impression log",
                format!("line `{}` has no configured conversion type", imp.line_id),
            )
        })?;
        labels.push(Label {
            positive: false,
            conv_type,
            conversion_ts: None,
        });
    }

    type Key<'a> = (&'a str, &'a str);
    let mut groups: HashMap<Key<'_>, (Vec<usize>, Vec<usize>)> = HashMap::new();
    for (i, imp) in impressions.iter().enumerate() {
        groups
            .entry((&imp.user_id, &imp.line_id))
            .or_default()
            .0
            .push(i);
    }
    let mut unmatched = 0;
    let mut type_mismatches = 0;
    for (j, conv) in conversions.iter().enumerate() {
        let conv_type = type_names
            .iter()
            .position(|n| *n == conv.conv_type)
            .ok_or_else(|| Error::UnknownConvType(conv.conv_type.clone()))?;
        match lines.get(&conv.line_id) {
            Some(t) if t as usize != conv_type => type_mismatches += 1,
            _ => match groups.get_mut(&(conv.user_id.as_str(), conv.line_id.as_str())) {
                Some(g) => g.1.push(j),
                None => unmatched += 1,
            },
        }
    }

    let results: Vec<(Vec<(usize, i64)>, usize)> = groups
        .into_par_iter()
        .map(|(_, (mut imps, mut convs))| {
            imps.sort_by_key(|&i| (impressions[i].timestamp, i));
            convs.sort_by_key(|&j| (conversions[j].timestamp, j));
            let mut credited = Vec::new();
            let mut missed = 0;
            for j in convs {
                let ts = conversions[j].timestamp;
                let upto = imps.partition_point(|&i| impressions[i].timestamp <= ts);
                match upto.checked_sub(1).map(|k| imps[k]) {
                    Some(i) if ts - impressions[i].timestamp <= window_secs => {
                        credited.push((i, ts))
                    }
                    _ => missed += 1,
                }
            }
            (credited, missed)
        })
        .collect();

    for (credited, missed) in results {
        unmatched += missed;
        // Within a group, conversions were visited in time order.
        for (i, ts) in credited {
            let label = &mut labels[i];
            if !label.positive {
                label.positive = true;
                label.conversion_ts = Some(ts);
            }
        }
    }

    Ok(Attribution {
        labels,
        unmatched_conversions: unmatched,
        type_mismatches,
    })
}
