//! Batch log loss and its analytic gradient.
//!
//! With `g = weight * (p - y)` per sample, the sample contributes `g` to the
//! bias of its slot, `g * v_f` to each main weight, `g * <v_p, v_q>` to each
//! learnable `r_pq`, and to each active embedding the sum of the factors it
//! multiplies. Parameters of a task slot only accumulate from samples of that
//! slot. The L2 penalty covers exactly the entries the batch touches, so
//! slots absent from a batch get neither data nor penalty gradient.

use std::borrow::Borrow;
use std::collections::HashMap;

use rayon::prelude::*;

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::model::config::{pair_index, pairs, ModelConfig, ModelKind};
use crate::model::forward::sigmoid;
use crate::model::{ModelParams, Rows, SparseInstance};

/// Samples per worker chunk in non-deterministic mode.
const PAR_CHUNK: usize = 64;

/// Gradient with the same layout as [`ModelParams`]; embedding rows are
/// stored sparsely in first-touch order.
#[derive(Clone, Debug)]
pub struct GradientBuffer {
    k: usize,
    pub bias: Vec<f64>,
    pub main_weights: Vec<f64>,
    pub interactions: Vec<f64>,
    slot_touched: Vec<bool>,
    rows: Vec<u32>,
    row_pos: HashMap<u32, usize>,
    row_grads: Vec<f64>,
    scratch: Vec<usize>,
}

impl GradientBuffer {
    pub fn new(config: &ModelConfig) -> Self {
        let slots = config.task_slots();
        GradientBuffer {
            k: config.embed_dim,
            bias: vec![0.0; slots],
            main_weights: vec![0.0; slots * config.input_fields() * config.embed_dim],
            interactions: vec![0.0; slots * config.interaction_fields().map_or(0, pairs)],
            slot_touched: vec![false; slots],
            rows: Vec::new(),
            row_pos: HashMap::new(),
            row_grads: Vec::new(),
            scratch: Vec::new(),
        }
    }

    pub fn clear(&mut self) {
        self.bias.fill(0.0);
        self.main_weights.fill(0.0);
        self.interactions.fill(0.0);
        self.slot_touched.fill(false);
        self.rows.clear();
        self.row_pos.clear();
        self.row_grads.clear();
    }

    /// Embedding rows with a (possibly zero) gradient entry, in first-touch order.
    pub fn touched_rows(&self) -> &[u32] {
        &self.rows
    }

    pub fn slot_touched(&self, slot: usize) -> bool {
        self.slot_touched[slot]
    }

    pub fn embedding(&self, row: u32) -> Option<&[f64]> {
        self.row_pos
            .get(&row)
            .map(|&i| &self.row_grads[i * self.k..(i + 1) * self.k])
    }

    /// Dense copy of the embedding gradient, `rows x K`.
    pub fn embeddings_dense(&self, rows: usize) -> Vec<f64> {
        let mut out = vec![0.0; rows * self.k];
        for (i, &r) in self.rows.iter().enumerate() {
            let r = r as usize;
            out[r * self.k..(r + 1) * self.k]
                .copy_from_slice(&self.row_grads[i * self.k..(i + 1) * self.k]);
        }
        out
    }

    fn row_slot(&mut self, row: u32) -> usize {
        if let Some(&i) = self.row_pos.get(&row) {
            return i;
        }
        let i = self.rows.len();
        self.rows.push(row);
        self.row_pos.insert(row, i);
        self.row_grads.resize(self.row_grads.len() + self.k, 0.0);
        i
    }

    fn emb_mut(&mut self, pos: usize) -> &mut [f64] {
        &mut self.row_grads[pos * self.k..(pos + 1) * self.k]
    }

    /// Adds another buffer into this one (rows keep this buffer's order first).
    pub fn merge(&mut self, other: &GradientBuffer) {
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            *a += b;
        }
        for (a, b) in self.main_weights.iter_mut().zip(&other.main_weights) {
            *a += b;
        }
        for (a, b) in self.interactions.iter_mut().zip(&other.interactions) {
            *a += b;
        }
        for (a, b) in self.slot_touched.iter_mut().zip(&other.slot_touched) {
            *a |= b;
        }
        for (i, &row) in other.rows.iter().enumerate() {
            let pos = self.row_slot(row);
            let k = self.k;
            let src = &other.row_grads[i * k..(i + 1) * k];
            for (a, b) in self.emb_mut(pos).iter_mut().zip(src) {
                *a += b;
            }
        }
    }

    pub(crate) fn check_shape(&self, params: &ModelParams) -> Result<()> {
        let ok = self.k == params.embed_dim()
            && self.bias.len() == params.bias.len()
            && self.main_weights.len() == params.main_weights.len()
            && self.interactions.len() == params.interactions.len()
            && self
                .rows
                .iter()
                .all(|&r| (r as usize) < params.config.input_features());
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(
                "gradient buffer was built for a different model".into(),
            ))
        }
    }

    /// Accumulates the data-term gradient of one sample scaled by `g`.
    fn add_sample(&mut self, params: &ModelParams, rows: &Rows<'_>, slot: usize, g: f64) {
        let config = &params.config;
        let k = self.k;
        let fields = rows.len();
        let view = params.view(slot);

        self.slot_touched[slot] = true;
        self.bias[slot] += g;

        let mut pos = std::mem::take(&mut self.scratch);
        pos.clear();
        pos.extend((0..fields).map(|f| self.row_slot(rows.get(f) as u32)));

        let main_base = slot * fields * k;
        for f in 0..fields {
            let v = params.embedding(rows.get(f));
            let w = &view.main[f * k..(f + 1) * k];
            let gm = &mut self.main_weights[main_base + f * k..main_base + (f + 1) * k];
            for i in 0..k {
                gm[i] += g * v[i];
            }
            let ge = self.emb_mut(pos[f]);
            for i in 0..k {
                ge[i] += g * w[i];
            }
        }

        // Pairwise term over all input fields; `r` is learnable for FwFM
        // kinds and fixed to 1 for FM and for the 2-way part of the 3-way kind.
        let pair_weights = match config.kind {
            ModelKind::FwfmCtf2 | ModelKind::MtFwfm => view.interactions,
            ModelKind::FmCtf2 | ModelKind::FwfmCtf3 => None,
        };
        let inter_base = slot * config.interaction_fields().map_or(0, pairs);
        let mut idx = 0;
        for p in 0..fields {
            let vp = params.embedding(rows.get(p));
            for q in p + 1..fields {
                let vq = params.embedding(rows.get(q));
                let r = match pair_weights {
                    Some(w) => {
                        let d: f64 = vp.iter().zip(vq).map(|(a, b)| a * b).sum();
                        self.interactions[inter_base + idx] += g * d;
                        w[idx]
                    }
                    None => 1.0,
                };
                idx += 1;
                let gr = g * r;
                if gr != 0.0 {
                    let ge = self.emb_mut(pos[p]);
                    for i in 0..k {
                        ge[i] += gr * vq[i];
                    }
                    let ge = self.emb_mut(pos[q]);
                    for i in 0..k {
                        ge[i] += gr * vp[i];
                    }
                }
            }
        }

        if config.kind == ModelKind::FwfmCtf3 {
            let r = view.interactions.expect("3-way kind has interaction weights");
            let n = rows.base_len();
            let t_pos = pos[n];
            let vt = params.embedding(rows.type_row().expect("type feature"));
            for p in 0..n {
                let vp = params.embedding(rows.get(p));
                for q in p + 1..n {
                    let vq = params.embedding(rows.get(q));
                    let pi = pair_index(n, p, q);
                    let d3: f64 = (0..k).map(|i| vp[i] * vq[i] * vt[i]).sum();
                    self.interactions[inter_base + pi] += g * d3;
                    let gr = g * r[pi];
                    if gr != 0.0 {
                        let ge = self.emb_mut(pos[p]);
                        for i in 0..k {
                            ge[i] += gr * vq[i] * vt[i];
                        }
                        let ge = self.emb_mut(pos[q]);
                        for i in 0..k {
                            ge[i] += gr * vp[i] * vt[i];
                        }
                        let ge = self.emb_mut(t_pos);
                        for i in 0..k {
                            ge[i] += gr * vp[i] * vq[i];
                        }
                    }
                }
            }
        }
        self.scratch = pos;
    }

    /// Adds `2 * lambda * theta` for every regularized entry the batch touched
    /// and returns the penalty `lambda * sum(theta^2)` over those entries.
    fn add_penalty(&mut self, params: &ModelParams, train: &TrainConfig) -> f64 {
        let lambda = train.reg_lambda;
        let mut omega = 0.0;
        if train.regularizes_embeddings() {
            for (i, &row) in self.rows.iter().enumerate() {
                let v = params.embedding(row as usize);
                let k = self.k;
                for (gi, &vi) in self.row_grads[i * k..(i + 1) * k].iter_mut().zip(v) {
                    *gi += 2.0 * lambda * vi;
                    omega += vi * vi;
                }
            }
        }
        if train.regularizes_weights() {
            let main_len = params.config.input_fields() * self.k;
            let inter_len = params.config.interaction_fields().map_or(0, pairs);
            for slot in (0..self.slot_touched.len()).filter(|&s| self.slot_touched[s]) {
                let range = slot * main_len..(slot + 1) * main_len;
                for (gi, &w) in self.main_weights[range.clone()]
                    .iter_mut()
                    .zip(&params.main_weights[range])
                {
                    *gi += 2.0 * lambda * w;
                    omega += w * w;
                }
                let range = slot * inter_len..(slot + 1) * inter_len;
                for (gi, &r) in self.interactions[range.clone()]
                    .iter_mut()
                    .zip(&params.interactions[range])
                {
                    *gi += 2.0 * lambda * r;
                    omega += r * r;
                }
            }
        }
        lambda * omega
    }
}

#[inline]
fn log_loss(p: f64, y: f64) -> f64 {
    -y * p.ln() - (1.0 - y) * (1.0 - p).ln()
}

/// Data loss of a slice of samples, accumulating gradients when `buf` is given.
fn accumulate<B: Borrow<SparseInstance>>(
    params: &ModelParams,
    batch: &[B],
    mut buf: Option<&mut GradientBuffer>,
) -> Result<f64> {
    let mut total = 0.0;
    for inst in batch {
        let inst = inst.borrow();
        let rows = inst.rows(&params.config)?;
        let slot = params.slot(inst.conv_type);
        let phi = params.view(slot).terms(params.config.kind, &rows).combine();
        let p = sigmoid(phi);
        let y = inst.target();
        total += inst.weight * log_loss(p, y);
        if let Some(buf) = buf.as_deref_mut() {
            buf.add_sample(params, &rows, slot, inst.weight * (p - y));
        }
    }
    Ok(total)
}

/// Fills `buf` with the gradient of the batch loss and returns the loss
/// (weighted log loss summed over the batch plus the penalty).
pub fn loss_and_gradients<B: Borrow<SparseInstance> + Sync>(
    params: &ModelParams,
    batch: &[B],
    train: &TrainConfig,
    buf: &mut GradientBuffer,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    buf.clear();
    buf.check_shape(params)?;
    let data = if train.deterministic || batch.len() < 2 * PAR_CHUNK {
        accumulate(params, batch, Some(buf))?
    } else {
        let parts: Vec<(f64, GradientBuffer)> = batch
            .par_chunks(PAR_CHUNK)
            .map(|chunk| {
                let mut local = GradientBuffer::new(&params.config);
                accumulate(params, chunk, Some(&mut local)).map(|l| (l, local))
            })
            .collect::<Result<_>>()?;
        parts.iter().fold(0.0, |acc, (l, part)| {
            buf.merge(part);
            acc + l
        })
    };
    Ok(data + buf.add_penalty(params, train))
}

/// Batch loss: summed weighted log loss plus `lambda * Omega` over the
/// parameters the batch touches.
pub fn loss(params: &ModelParams, batch: &[SparseInstance], train: &TrainConfig) -> Result<f64> {
    let mut buf = GradientBuffer::new(&params.config);
    loss_and_gradients(params, batch, train, &mut buf)
}

pub fn gradients(
    params: &ModelParams,
    batch: &[SparseInstance],
    train: &TrainConfig,
) -> Result<GradientBuffer> {
    let mut buf = GradientBuffer::new(&params.config);
    loss_and_gradients(params, batch, train, &mut buf)?;
    Ok(buf)
}

/// Summed weighted log loss without any penalty.
pub fn data_loss(params: &ModelParams, data: &[SparseInstance]) -> Result<f64> {
    accumulate(params, data, None)
}
