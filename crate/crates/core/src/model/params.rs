use serde::{Deserialize, Serialize};

use super::config::{pair_index, pairs, ModelConfig, ModelKind};
use crate::error::{Error, Result};

/// All learnable parameters of a model, stored as flat row-major tensors.
///
/// Interaction weights are kept as the packed strict upper triangle of each
/// slot's symmetric field-by-field matrix. The zero diagonal is not stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// One bias per task slot.
    pub bias: Vec<f64>,
    /// `input_features x K`.
    pub embeddings: Vec<f64>,
    /// `task_slots x input_fields x K`.
    pub main_weights: Vec<f64>,
    /// `task_slots x pairs(interaction_fields)`; empty for FM.
    pub interactions: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let k = config.embed_dim;
        let slots = config.task_slots();
        Ok(ModelParams {
            bias: vec![0.0; slots],
            embeddings: vec![0.0; config.input_features() * k],
            main_weights: vec![0.0; slots * config.input_fields() * k],
            interactions: vec![0.0; slots * config.interaction_fields().map_or(0, pairs)],
            config,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn embed_dim(&self) -> usize {
        self.config.embed_dim
    }

    /// Task slot used by an instance of the given conversion type.
    #[inline]
    pub fn slot(&self, conv_type: u32) -> usize {
        match self.config.kind {
            ModelKind::MtFwfm => conv_type as usize,
            _ => 0,
        }
    }

    #[inline]
    pub fn embedding(&self, row: usize) -> &[f64] {
        let k = self.config.embed_dim;
        &self.embeddings[row * k..(row + 1) * k]
    }

    pub fn embedding_mut(&mut self, row: usize) -> &mut [f64] {
        let k = self.config.embed_dim;
        &mut self.embeddings[row * k..(row + 1) * k]
    }

    /// Main-term weight vectors of one slot, `input_fields x K`.
    #[inline]
    pub fn main_slot(&self, slot: usize) -> &[f64] {
        let len = self.config.input_fields() * self.config.embed_dim;
        &self.main_weights[slot * len..(slot + 1) * len]
    }

    pub fn main_weight_mut(&mut self, slot: usize, field: usize) -> &mut [f64] {
        let k = self.config.embed_dim;
        let start = (slot * self.config.input_fields() + field) * k;
        &mut self.main_weights[start..start + k]
    }

    /// Packed interaction weights of one slot, or `None` when `r` is fixed to 1.
    #[inline]
    pub fn interaction_slot(&self, slot: usize) -> Option<&[f64]> {
        let n = self.config.interaction_fields()?;
        let len = pairs(n);
        Some(&self.interactions[slot * len..(slot + 1) * len])
    }

    /// `r` for fields `p`, `q` in the given slot: symmetric, zero on the
    /// diagonal, and 1 off the diagonal for FM.
    pub fn r(&self, slot: usize, p: usize, q: usize) -> f64 {
        if p == q {
            return 0.0;
        }
        let (p, q) = if p < q { (p, q) } else { (q, p) };
        match self.interaction_slot(slot) {
            Some(packed) => {
                let n = self.config.interaction_fields().unwrap_or(0);
                packed[pair_index(n, p, q)]
            }
            None => 1.0,
        }
    }

    /// Sets `r` for an off-diagonal pair. Errors when `r` is not learnable
    /// (FM) or the pair is on the diagonal.
    pub fn set_r(&mut self, slot: usize, p: usize, q: usize, value: f64) -> Result<()> {
        let n = self
            .config
            .interaction_fields()
            .ok_or_else(|| Error::WrongModelKind(self.config.kind.to_string()))?;
        if p == q || p >= n || q >= n || slot >= self.config.task_slots() {
            return Err(Error::ShapeMismatch(format!(
                "no free interaction weight at slot {slot}, fields ({p}, {q})"
            )));
        }
        let (p, q) = if p < q { (p, q) } else { (q, p) };
        self.interactions[slot * pairs(n) + pair_index(n, p, q)] = value;
        Ok(())
    }

    /// Full symmetric `n x n` interaction matrix of one slot, row-major.
    pub fn interaction_matrix(&self, slot: usize) -> Vec<f64> {
        let n = self
            .config
            .interaction_fields()
            .unwrap_or_else(|| self.config.input_fields());
        let mut m = vec![0.0; n * n];
        for p in 0..n {
            for q in 0..n {
                m[p * n + q] = self.r(slot, p, q);
            }
        }
        m
    }

    /// Number of scalars actually allocated.
    pub fn scalar_count(&self) -> usize {
        self.bias.len() + self.embeddings.len() + self.main_weights.len() + self.interactions.len()
    }

    pub fn check_shapes(&self) -> Result<()> {
        let expected = ModelParams::zeros(self.config.clone())?;
        self.same_shape(&expected)
    }

    pub(crate) fn same_shape(&self, other: &ModelParams) -> Result<()> {
        let dims = |p: &ModelParams| {
            [
                p.bias.len(),
                p.embeddings.len(),
                p.main_weights.len(),
                p.interactions.len(),
            ]
        };
        if dims(self) != dims(other) {
            return Err(Error::ShapeMismatch(format!(
                "tensor lengths {:?} vs {:?}",
                dims(self),
                dims(other)
            )));
        }
        Ok(())
    }

    /// The four parameter tensors in storage order.
    pub fn tensors(&self) -> [&[f64]; 4] {
        [
            &self.bias,
            &self.embeddings,
            &self.main_weights,
            &self.interactions,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [
            &mut self.bias,
            &mut self.embeddings,
            &mut self.main_weights,
            &mut self.interactions,
        ]
    }
}
