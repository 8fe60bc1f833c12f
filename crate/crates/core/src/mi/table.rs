use serde::{Deserialize, Serialize};

use super::counts::ContingencyCounts;
use crate::error::{Error, Result};

/// Per-type mutual information between each field pair and the label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiTable {
    pub num_fields: usize,
    /// `N x N` row-major symmetric matrix per type with a zero diagonal;
    /// `None` for types without samples.
    pub per_type: Vec<Option<Vec<f64>>>,
    /// `(type, p, q)` pairs whose counts overflowed the cell cap; their
    /// entries hold the MI of the retained cells only and should not be ranked.
    pub excluded: Vec<(u32, usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedPair {
    pub p: usize,
    pub q: usize,
    pub mi: f64,
}

/// Plug-in estimate with natural log over the samples of each type:
///
/// `MI = sum_{(i,j), l} c_ijl/n * ln(c_ijl * n / (c_ij * n_l))`
///
/// Empty cells contribute nothing. Cells are summed in key order.
pub fn mutual_information(counts: &ContingencyCounts) -> MiTable {
    let n_fields = counts.num_fields;
    let mut excluded = Vec::new();
    let per_type = counts
        .types
        .iter()
        .enumerate()
        .map(|(t, tc)| {
            if tc.total == 0 {
                return None;
            }
            let n = tc.total as f64;
            let mut m = vec![0.0; n_fields * n_fields];
            let mut idx = 0;
            for p in 0..n_fields {
                for q in p + 1..n_fields {
                    let pair = &tc.pairs[idx];
                    idx += 1;
                    if pair.overflowed() {
                        excluded.push((t as u32, p, q));
                    }
                    let mut cells: Vec<_> = pair.cells.iter().collect();
                    cells.sort_unstable_by_key(|(k, _)| **k);
                    let mut mi = 0.0;
                    for (_, c) in cells {
                        let c_ij = (c[0] + c[1]) as f64;
                        for l in 0..2 {
                            if c[l] == 0 {
                                continue;
                            }
                            let c_ijl = c[l] as f64;
                            let n_l = tc.label_counts[l] as f64;
                            mi += c_ijl / n * (c_ijl * n / (c_ij * n_l)).ln();
                        }
                    }
                    m[p * n_fields + q] = mi;
                    m[q * n_fields + p] = mi;
                }
            }
            Some(m)
        })
        .collect();
    MiTable {
        num_fields: n_fields,
        per_type,
        excluded,
    }
}

impl MiTable {
    pub fn matrix(&self, conv_type: u32) -> Option<&[f64]> {
        self.per_type.get(conv_type as usize)?.as_deref()
    }

    pub fn get(&self, conv_type: u32, p: usize, q: usize) -> Option<f64> {
        self.matrix(conv_type).map(|m| m[p * self.num_fields + q])
    }

    /// Strict upper triangle of a type's matrix, row-major.
    pub fn upper_triangle(&self, conv_type: u32) -> Option<Vec<f64>> {
        let n = self.num_fields;
        self.matrix(conv_type).map(|m| upper_triangle(m, n))
    }
}

pub(crate) fn upper_triangle(m: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .flat_map(|p| (p + 1..n).map(move |q| m[p * n + q]))
        .collect()
}

/// The `k` field pairs with the highest MI for a type, ties broken by
/// ascending `(p, q)`. Asking for more pairs than exist returns all of them.
pub fn top_k_pairs(mi: &MiTable, conv_type: u32, k: usize) -> Result<Vec<RankedPair>> {
    let m = mi.matrix(conv_type).ok_or_else(|| {
        Error::InvalidConfig(format!("conversion type {conv_type} has no MI matrix"))
    })?;
    let n = mi.num_fields;
    let mut ranked: Vec<RankedPair> = (0..n)
        .flat_map(|p| (p + 1..n).map(move |q| RankedPair { p, q, mi: m[p * n + q] }))
        .collect();
    ranked.sort_by(|a, b| b.mi.total_cmp(&a.mi).then((a.p, a.q).cmp(&(b.p, b.q))));
    ranked.truncate(k);
    Ok(ranked)
}
