use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::pairs;
use crate::model::{FieldSchema, SparseInstance};

/// Joint counts of one field pair: `(feature_p, feature_q) -> [negatives, positives]`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PairCounts {
    pub cells: HashMap<(u32, u32), [u64; 2]>,
    /// Samples whose cell could not be stored because of the per-pair cap.
    pub overflow: [u64; 2],
}

impl PairCounts {
    pub fn overflowed(&self) -> bool {
        self.overflow != [0, 0]
    }

    fn add(&mut self, key: (u32, u32), counts: [u64; 2], cap: Option<usize>) {
        if let Some(cell) = self.cells.get_mut(&key) {
            cell[0] += counts[0];
            cell[1] += counts[1];
        } else if cap.is_some_and(|c| self.cells.len() >= c) {
            self.overflow[0] += counts[0];
            self.overflow[1] += counts[1];
        } else {
            self.cells.insert(key, counts);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeCounts {
    pub total: u64,
    /// `[negatives, positives]`
    pub label_counts: [u64; 2],
    /// Packed over field pairs `p < q`.
    pub pairs: Vec<PairCounts>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountOptions {
    /// Maximum distinct cells stored per (type, pair). Samples falling into
    /// new cells beyond the cap are tallied as overflow and the pair's MI is
    /// reported as excluded.
    pub max_cells_per_pair: Option<usize>,
}

/// Per-type contingency tables of every field pair against the label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyCounts {
    pub num_fields: usize,
    pub types: Vec<TypeCounts>,
    options: CountOptions,
}

impl ContingencyCounts {
    pub fn empty(num_fields: usize, num_types: usize, options: CountOptions) -> Self {
        let type_counts = TypeCounts {
            total: 0,
            label_counts: [0, 0],
            pairs: vec![PairCounts::default(); pairs(num_fields)],
        };
        ContingencyCounts {
            num_fields,
            types: vec![type_counts; num_types],
            options,
        }
    }

    /// Counts the dataset's base fields, one pass, using the schema's field
    /// and type counts.
    pub fn count(data: &[SparseInstance], schema: &FieldSchema) -> Result<Self> {
        Self::count_with(data, schema.num_fields(), schema.num_types(), CountOptions::default())
    }

    pub fn count_with(
        data: &[SparseInstance],
        num_fields: usize,
        num_types: usize,
        options: CountOptions,
    ) -> Result<Self> {
        let mut counts = ContingencyCounts::empty(num_fields, num_types, options);
        for inst in data {
            counts.add(inst)?;
        }
        Ok(counts)
    }

    /// Parallel counting: per-worker tables merged associatively. Identical
    /// to [`ContingencyCounts::count_with`] whenever no cap is hit.
    pub fn count_par(
        data: &[SparseInstance],
        num_fields: usize,
        num_types: usize,
        options: CountOptions,
    ) -> Result<Self> {
        data.par_chunks(4096)
            .map(|chunk| Self::count_with(chunk, num_fields, num_types, options))
            .try_reduce(
                || ContingencyCounts::empty(num_fields, num_types, options),
                |mut a, b| {
                    a.merge(&b);
                    Ok(a)
                },
            )
    }

    pub fn add(&mut self, inst: &SparseInstance) -> Result<()> {
        let n = self.num_fields;
        let active = inst.active.get(..n).ok_or(Error::DimensionMismatch {
            expected: n,
            got: inst.active.len(),
        })?;
        let num_types = self.types.len();
        let tc = self
            .types
            .get_mut(inst.conv_type as usize)
            .ok_or(Error::ConvTypeOutOfRange {
                conv_type: inst.conv_type,
                num_types,
            })?;
        let l = usize::from(inst.label);
        let mut one = [0u64; 2];
        one[l] = 1;
        tc.total += 1;
        tc.label_counts[l] += 1;
        let mut idx = 0;
        for p in 0..n {
            for q in p + 1..n {
                tc.pairs[idx].add((active[p], active[q]), one, self.options.max_cells_per_pair);
                idx += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ContingencyCounts) {
        let cap = self.options.max_cells_per_pair;
        for (a, b) in self.types.iter_mut().zip(&other.types) {
            a.total += b.total;
            a.label_counts[0] += b.label_counts[0];
            a.label_counts[1] += b.label_counts[1];
            for (pa, pb) in a.pairs.iter_mut().zip(&b.pairs) {
                let mut keys: Vec<_> = pb.cells.keys().copied().collect();
                keys.sort_unstable();
                for key in keys {
                    pa.add(key, pb.cells[&key], cap);
                }
                pa.overflow[0] += pb.overflow[0];
                pa.overflow[1] += pb.overflow[1];
            }
        }
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }
}
