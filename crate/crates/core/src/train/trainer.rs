use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{Sampling, TrainConfig};
use super::gradient::{loss_and_gradients, GradientBuffer};
use super::sgd::{init_params, sgd_step};
use crate::error::{Error, Result};
use crate::metrics::{report, scored_samples, TypeWeights};
use crate::model::{ModelConfig, ModelParams, SparseInstance};

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-sample training objective over the epoch's batches.
    pub train_loss: f64,
    pub val_auc_overall: Option<f64>,
    pub val_auc_per_type: BTreeMap<u32, f64>,
    pub val_auc_weighted: Option<f64>,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub selected_epoch: usize,
    pub stopped_early: bool,
}

impl TrainLog {
    /// Newline-delimited JSON, one record per epoch.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            let _ = writeln!(out, "{}", serde_json::to_string(e).expect("record serializes"));
        }
        out
    }
}

/// Joint mini-batch SGD over all conversion types.
///
/// Each epoch shuffles the training set and steps once per batch. When a
/// validation set is given, the parameters from the epoch with the best
/// validation weighted AUC (weights = per-type validation counts) are
/// returned; otherwise the final parameters are.
pub fn train(
    data: &[SparseInstance],
    val: &[SparseInstance],
    mconfig: &ModelConfig,
    tconfig: &TrainConfig,
) -> Result<(ModelParams, TrainLog)> {
    tconfig.validate()?;
    mconfig.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for inst in data.iter().chain(val) {
        inst.rows(mconfig)?;
    }

    let mut params = init_params(mconfig, tconfig)?;
    let mut rng = ChaCha8Rng::seed_from_u64(tconfig.seed);
    rng.set_stream(1);
    let mut buf = GradientBuffer::new(mconfig);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut batch = Vec::with_capacity(tconfig.batch_size);

    let mut log = TrainLog::default();
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut since_best = 0;

    for epoch in 1..=tconfig.max_epochs {
        let start = Instant::now();
        match tconfig.sampling {
            Sampling::Epoch => order.shuffle(&mut rng),
            Sampling::WithReplacement => {
                for slot in order.iter_mut() {
                    *slot = rng.random_range(0..data.len());
                }
            }
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(tconfig.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| &data[i]));
            let loss = loss_and_gradients(&params, &batch, tconfig, &mut buf)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            epoch_loss += loss;
            sgd_step(&mut params, &buf, tconfig)?;
        }
        if params.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::Divergence {
                epoch,
                loss: f64::NAN,
            });
        }

        let mut record = EpochRecord {
            epoch,
            train_loss: epoch_loss / data.len() as f64,
            val_auc_overall: None,
            val_auc_per_type: BTreeMap::new(),
            val_auc_weighted: None,
            wall_ms: 0,
        };
        if !val.is_empty() {
            let samples = scored_samples(&params.predict_all(val)?, val);
            if let Ok(r) = report(&samples, &TypeWeights::from_counts(&samples)) {
                record.val_auc_overall = Some(r.auc_overall);
                record.val_auc_weighted = Some(r.auc_weighted);
                record.val_auc_per_type = r.auc_per_type;
            }
        }
        record.wall_ms = start.elapsed().as_millis() as u64;
        log::info!(
            "epoch {epoch}: loss {:.5} val weighted AUC {:?}",
            record.train_loss,
            record.val_auc_weighted
        );

        let score = record.val_auc_weighted;
        log.epochs.push(record);
        if let Some(score) = score {
            if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
                best = Some((score, epoch, params.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if tconfig.early_stop_patience > 0 && since_best >= tconfig.early_stop_patience {
                    log.stopped_early = true;
                    break;
                }
            }
        }
    }

    Ok(match best {
        Some((_, epoch, best_params)) => {
            log.selected_epoch = epoch;
            (best_params, log)
        }
        None => {
            log.selected_epoch = log.epochs.len();
            (params, log)
        }
    })
}
