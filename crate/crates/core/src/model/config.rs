use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// 2-way FM with the conversion type appended as an extra field.
    #[serde(rename = "fm-ctf2")]
    FmCtf2,
    /// 2-way FwFM with the conversion type appended as an extra field.
    #[serde(rename = "fwfm-ctf2")]
    FwfmCtf2,
    /// Multi-task FwFM: shared embeddings, per-type bias, main and interaction weights.
    #[serde(rename = "mt-fwfm")]
    MtFwfm,
    /// FwFM with 3-way (feature, feature, conversion type) interactions.
    #[serde(rename = "fwfm-ctf3")]
    FwfmCtf3,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::FmCtf2,
        ModelKind::FwfmCtf2,
        ModelKind::MtFwfm,
        ModelKind::FwfmCtf3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::FmCtf2 => "fm-ctf2",
            ModelKind::FwfmCtf2 => "fwfm-ctf2",
            ModelKind::MtFwfm => "mt-fwfm",
            ModelKind::FwfmCtf3 => "fwfm-ctf3",
        }
    }

    /// Whether the conversion type enters the model as an appended input field.
    pub fn is_ctf(self) -> bool {
        !matches!(self, ModelKind::MtFwfm)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model kind `{s}`")))
    }
}

/// Shape of a model.
///
/// `field_sizes` lists the cardinality of each of the N base fields (OOV slot
/// included); feature indices of field `k` occupy a contiguous block starting
/// at the sum of the preceding sizes, so M is their total. CTF kinds append a
/// conversion-type field holding features `M..M+T`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub field_sizes: Vec<usize>,
    pub num_types: usize,
    pub embed_dim: usize,
}

impl ModelConfig {
    pub fn new(
        kind: ModelKind,
        field_sizes: Vec<usize>,
        num_types: usize,
        embed_dim: usize,
    ) -> Result<Self> {
        let config = ModelConfig {
            kind,
            field_sizes,
            num_types,
            embed_dim,
        };
        config.validate()?;
        Ok(config)
    }

    /// Spreads `num_features` over `num_fields` fields as evenly as possible.
    pub fn uniform(
        kind: ModelKind,
        num_fields: usize,
        num_features: usize,
        num_types: usize,
        embed_dim: usize,
    ) -> Result<Self> {
        if num_fields == 0 || num_features < num_fields {
            return Err(Error::InvalidConfig(format!(
                "{num_features} features cannot cover {num_fields} fields"
            )));
        }
        let base = num_features / num_fields;
        let extra = num_features % num_fields;
        let sizes = (0..num_fields)
            .map(|f| base + usize::from(f < extra))
            .collect();
        ModelConfig::new(kind, sizes, num_types, embed_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(Error::InvalidConfig("embed_dim must be >= 1".into()));
        }
        if self.num_types == 0 {
            return Err(Error::InvalidConfig("num_types must be >= 1".into()));
        }
        if self.field_sizes.len() < 2 {
            return Err(Error::InvalidConfig("at least 2 fields are required".into()));
        }
        if let Some(f) = self.field_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidConfig(format!("field {f} has no features")));
        }
        if self.input_features() > u32::MAX as usize {
            return Err(Error::InvalidConfig("too many features for u32 indices".into()));
        }
        Ok(())
    }

    /// N: number of base fields.
    pub fn num_fields(&self) -> usize {
        self.field_sizes.len()
    }

    /// M: number of base features.
    pub fn num_features(&self) -> usize {
        self.field_sizes.iter().sum()
    }

    /// Number of fields the model sees per instance (N, or N+1 for CTF kinds).
    pub fn input_fields(&self) -> usize {
        self.num_fields() + usize::from(self.kind.is_ctf())
    }

    /// Number of embedding rows (M, or M+T for CTF kinds).
    pub fn input_features(&self) -> usize {
        self.num_features() + if self.kind.is_ctf() { self.num_types } else { 0 }
    }

    /// Number of independent bias/main/interaction parameter sets.
    pub fn task_slots(&self) -> usize {
        match self.kind {
            ModelKind::MtFwfm => self.num_types,
            _ => 1,
        }
    }

    /// Fields spanned by the interaction weights `r`, or `None` when `r` is fixed.
    pub fn interaction_fields(&self) -> Option<usize> {
        match self.kind {
            ModelKind::FmCtf2 => None,
            ModelKind::FwfmCtf2 => Some(self.num_fields() + 1),
            ModelKind::MtFwfm | ModelKind::FwfmCtf3 => Some(self.num_fields()),
        }
    }

    /// First feature index of each input field, with the total as a trailing entry.
    pub fn field_offsets(&self) -> Vec<u32> {
        let mut offsets = Vec::with_capacity(self.input_fields() + 1);
        let mut acc = 0u32;
        offsets.push(acc);
        for &s in &self.field_sizes {
            acc += s as u32;
            offsets.push(acc);
        }
        if self.kind.is_ctf() {
            acc += self.num_types as u32;
            offsets.push(acc);
        }
        offsets
    }

    /// Embedding row of the conversion-type feature for CTF kinds.
    pub fn type_feature(&self, conv_type: u32) -> u32 {
        (self.num_features() + conv_type as usize) as u32
    }

    pub fn with_kind(&self, kind: ModelKind) -> ModelConfig {
        ModelConfig {
            kind,
            ..self.clone()
        }
    }
}

/// Number of unordered pairs among `n` items.
pub fn pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of pair `(p, q)`, `p < q < n`, in row-major upper-triangle packing.
#[inline]
pub fn pair_index(n: usize, p: usize, q: usize) -> usize {
    debug_assert!(p < q && q < n);
    p * (2 * n - p - 1) / 2 + (q - p - 1)
}
