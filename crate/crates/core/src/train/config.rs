use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameter groups covered by the L2 penalty. Biases are never penalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegKind {
    /// Embeddings, main weights and interaction weights.
    L2All,
    L2EmbedOnly,
    None,
}

/// How mini-batches are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Shuffle once per epoch and walk the permutation in batches.
    Epoch,
    /// Draw every batch independently, with replacement; an epoch is
    /// `ceil(n / batch_size)` such batches.
    WithReplacement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub reg_lambda: f64,
    pub reg_kind: RegKind,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub init_scale: f64,
    /// Interaction weights start i.i.d. uniform in
    /// `[-interaction_init, interaction_init]`.
    pub interaction_init: f64,
    pub deterministic: bool,
    /// Stop after this many epochs without a validation weighted-AUC
    /// improvement; 0 disables early stopping.
    pub early_stop_patience: usize,
    pub sampling: Sampling,
    /// Keeps embeddings fixed at their initial values.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub freeze_embeddings: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.002,
            reg_lambda: 1e-4,
            reg_kind: RegKind::L2All,
            batch_size: 128,
            max_epochs: 10,
            seed: 0,
            init_scale: 0.05,
            interaction_init: 0.0,
            deterministic: true,
            early_stop_patience: 3,
            sampling: Sampling::Epoch,
            freeze_embeddings: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be finite and >= 0".into()));
        }
        if !(self.reg_lambda.is_finite() && self.reg_lambda >= 0.0) {
            return Err(Error::InvalidConfig("reg_lambda must be finite and >= 0".into()));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::InvalidConfig("init_scale must be finite and >= 0".into()));
        }
        if !(self.interaction_init.is_finite() && self.interaction_init >= 0.0) {
            return Err(Error::InvalidConfig("interaction_init must be finite and >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be >= 1".into()));
        }
        Ok(())
    }

    pub(crate) fn regularizes_embeddings(&self) -> bool {
        self.reg_lambda > 0.0 && matches!(self.reg_kind, RegKind::L2All | RegKind::L2EmbedOnly)
    }

    pub(crate) fn regularizes_weights(&self) -> bool {
        self.reg_lambda > 0.0 && self.reg_kind == RegKind::L2All
    }
}
