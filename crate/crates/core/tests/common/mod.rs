//! Independent reference implementations used by the integration tests.
//!
//! Everything here is written the slow, obvious way: explicit loops over
//! fields, all sample pairs for AUC, full joint tables for MI and a scan of
//! every impression for attribution.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use mtfwfm::data::{ConversionRecord, ImpressionRecord, Label, LineRecord};
use mtfwfm::{ModelConfig, ModelKind, ModelParams, ScoredSample, SparseInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small random shape: `2..=max_n` fields with 1 to 4 values each.
pub fn random_config(rng: &mut ChaCha8Rng, kind: ModelKind, max_n: usize, max_k: usize, max_t: usize) -> ModelConfig {
    let n = rng.random_range(2..=max_n);
    let sizes = (0..n).map(|_| rng.random_range(1..=4)).collect();
    let t = rng.random_range(1..=max_t);
    let k = rng.random_range(1..=max_k);
    ModelConfig::new(kind, sizes, t, k).unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng, config: &ModelConfig, scale: f64) -> ModelParams {
    let mut params = ModelParams::zeros(config.clone()).unwrap();
    for tensor in params.tensors_mut() {
        for v in tensor.iter_mut() {
            *v = rng.random_range(-scale..=scale);
        }
    }
    params
}

pub fn random_instance(rng: &mut ChaCha8Rng, config: &ModelConfig) -> SparseInstance {
    let mut lo = 0u32;
    let mut active = Vec::with_capacity(config.field_sizes.len());
    for &size in &config.field_sizes {
        active.push(lo + rng.random_range(0..size as u32));
        lo += size as u32;
    }
    let t = rng.random_range(0..config.num_types as u32);
    SparseInstance::new(active, t, rng.random_bool(0.5))
}

pub fn random_instances(rng: &mut ChaCha8Rng, config: &ModelConfig, n: usize) -> Vec<SparseInstance> {
    (0..n).map(|_| random_instance(rng, config)).collect()
}

fn emb(params: &ModelParams, row: usize) -> &[f64] {
    params.embedding(row)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Embedding rows read by the model, type feature appended for CTF kinds.
pub fn model_rows(config: &ModelConfig, inst: &SparseInstance) -> Vec<usize> {
    let n = config.field_sizes.len();
    let mut rows: Vec<usize> = inst.active[..n].iter().map(|&f| f as usize).collect();
    if config.kind.is_ctf() {
        let m: usize = config.field_sizes.iter().sum();
        rows.push(m + inst.conv_type as usize);
    }
    rows
}

/// Score assembled term by term from the model definitions.
pub fn naive_phi(params: &ModelParams, inst: &SparseInstance) -> f64 {
    let c = &params.config;
    let k = c.embed_dim;
    let n = c.field_sizes.len();
    let slot = if c.kind == ModelKind::MtFwfm { inst.conv_type as usize } else { 0 };
    let rows = model_rows(c, inst);
    let fields = rows.len();

    let main_len = fields * k;
    let w = &params.main_weights[slot * main_len..(slot + 1) * main_len];
    let mut main = 0.0;
    for (f, &row) in rows.iter().enumerate() {
        main += dot(emb(params, row), &w[f * k..(f + 1) * k]);
    }

    let mut pairwise = 0.0;
    for p in 0..fields {
        for q in p + 1..fields {
            let d = dot(emb(params, rows[p]), emb(params, rows[q]));
            pairwise += match c.kind {
                ModelKind::FmCtf2 | ModelKind::FwfmCtf3 => d,
                ModelKind::FwfmCtf2 | ModelKind::MtFwfm => d * params.r(slot, p, q),
            };
        }
    }

    let phi = params.bias[slot] + main + pairwise;
    if c.kind != ModelKind::FwfmCtf3 {
        return phi;
    }
    let vt = emb(params, rows[n]);
    let mut three = 0.0;
    for p in 0..n {
        for q in p + 1..n {
            let (vp, vq) = (emb(params, rows[p]), emb(params, rows[q]));
            let mut d = 0.0;
            for i in 0..k {
                d += vp[i] * vq[i] * vt[i];
            }
            three += d * params.r(0, p, q);
        }
    }
    phi + three
}

/// Single-task FwFM over the base fields only, reading slot 0's weights.
pub fn single_task_fwfm(
    w0: f64,
    embeddings: &[f64],
    main: &[f64],
    r: &dyn Fn(usize, usize) -> f64,
    k: usize,
    active: &[u32],
) -> f64 {
    let v = |i: usize| &embeddings[active[i] as usize * k..(active[i] as usize + 1) * k];
    let mut s_main = 0.0;
    for f in 0..active.len() {
        s_main += dot(v(f), &main[f * k..(f + 1) * k]);
    }
    let mut s_pair = 0.0;
    for p in 0..active.len() {
        for q in p + 1..active.len() {
            s_pair += dot(v(p), v(q)) * r(p, q);
        }
    }
    w0 + s_main + s_pair
}

/// Log loss of one sample straight from the definition.
pub fn log_loss(phi: f64, label: bool) -> f64 {
    let p = 1.0 / (1.0 + (-phi).exp());
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Fraction of (positive, negative) pairs ranked correctly, ties counting half.
pub fn pairwise_auc(samples: &[ScoredSample]) -> Option<f64> {
    let pos: Vec<f64> = samples.iter().filter(|s| s.label).map(|s| s.score).collect();
    let neg: Vec<f64> = samples.iter().filter(|s| !s.label).map(|s| s.score).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for &p in &pos {
        for &q in &neg {
            if p > q {
                wins += 1.0;
            } else if p == q {
                wins += 0.5;
            }
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

/// Per-type MI matrices (`None` for absent types) by explicit joint counting.
pub fn brute_mi(data: &[SparseInstance], n: usize, t: usize) -> Vec<Option<Vec<f64>>> {
    (0..t as u32)
        .map(|ty| {
            let sub: Vec<&SparseInstance> = data.iter().filter(|s| s.conv_type == ty).collect();
            if sub.is_empty() {
                return None;
            }
            let total = sub.len() as f64;
            let mut m = vec![0.0; n * n];
            for p in 0..n {
                for q in p + 1..n {
                    let vp: BTreeSet<u32> = sub.iter().map(|s| s.active[p]).collect();
                    let vq: BTreeSet<u32> = sub.iter().map(|s| s.active[q]).collect();
                    let mut mi = 0.0;
                    for &i in &vp {
                        for &j in &vq {
                            for l in [false, true] {
                                let c_ijl = sub
                                    .iter()
                                    .filter(|s| s.active[p] == i && s.active[q] == j && s.label == l)
                                    .count() as f64;
                                if c_ijl == 0.0 {
                                    continue;
                                }
                                let c_ij = sub
                                    .iter()
                                    .filter(|s| s.active[p] == i && s.active[q] == j)
                                    .count() as f64;
                                let n_l = sub.iter().filter(|s| s.label == l).count() as f64;
                                let p_ijl = c_ijl / total;
                                mi += p_ijl * (p_ijl / ((c_ij / total) * (n_l / total))).ln();
                            }
                        }
                    }
                    m[p * n + q] = mi;
                    m[q * n + p] = mi;
                }
            }
            Some(m)
        })
        .collect()
}

/// Result of scanning every impression for each conversion.
pub struct NaiveAttribution {
    pub labels: Vec<Label>,
    pub unmatched: usize,
    pub mismatches: usize,
}

pub fn naive_attribution(
    impressions: &[ImpressionRecord],
    conversions: &[ConversionRecord],
    lines: &[LineRecord],
    type_names: &[String],
    window: i64,
) -> NaiveAttribution {
    let line_type: BTreeMap<&str, u32> = lines
        .iter()
        .map(|l| {
            let t = type_names.iter().position(|n| *n == l.conv_type).unwrap() as u32;
            (l.line_id.as_str(), t)
        })
        .collect();
    let mut labels: Vec<Label> = impressions
        .iter()
        .map(|imp| Label {
            positive: false,
            conv_type: line_type[imp.line_id.as_str()],
            conversion_ts: None,
        })
        .collect();
    let (mut unmatched, mut mismatches) = (0, 0);
    for conv in conversions {
        let ct = type_names.iter().position(|n| *n == conv.conv_type).unwrap() as u32;
        if line_type.get(conv.line_id.as_str()).is_some_and(|&t| t != ct) {
            mismatches += 1;
            continue;
        }
        let mut best: Option<(i64, usize)> = None;
        for (i, imp) in impressions.iter().enumerate() {
            if imp.user_id == conv.user_id
                && imp.line_id == conv.line_id
                && imp.timestamp <= conv.timestamp
                && conv.timestamp <= imp.timestamp + window
                && best.is_none_or(|b| (imp.timestamp, i) > b)
            {
                best = Some((imp.timestamp, i));
            }
        }
        match best {
            Some((_, i)) => {
                let l = &mut labels[i];
                l.positive = true;
                l.conversion_ts = Some(l.conversion_ts.map_or(conv.timestamp, |t| t.min(conv.timestamp)));
            }
            None => unmatched += 1,
        }
    }
    NaiveAttribution {
        labels,
        unmatched,
        mismatches,
    }
}

pub fn type_names(t: usize) -> Vec<String> {
    (0..t).map(|i| format!("type{i}")).collect()
}

/// Random raw logs over a handful of users and lines so that collisions,
/// repeats and equal timestamps are common.
pub fn random_logs(
    rng: &mut ChaCha8Rng,
    impressions: usize,
    conversions: usize,
    t: usize,
    horizon: i64,
) -> (Vec<ImpressionRecord>, Vec<ConversionRecord>, Vec<LineRecord>) {
    let names = type_names(t);
    let n_lines = rng.random_range(1..=6);
    let lines: Vec<LineRecord> = (0..n_lines)
        .map(|j| LineRecord {
            line_id: format!("line{j}"),
            conv_type: names[rng.random_range(0..t)].clone(),
        })
        .collect();
    let users = rng.random_range(1..=20);
    let imps = (0..impressions)
        .map(|_| ImpressionRecord {
            timestamp: rng.random_range(0..horizon),
            user_id: format!("u{}", rng.random_range(0..users)),
            line_id: lines[rng.random_range(0..n_lines)].line_id.clone(),
            fields: BTreeMap::from([
                ("a".to_string(), format!("a{}", rng.random_range(0..5))),
                ("b".to_string(), format!("b{}", rng.random_range(0..3))),
            ]),
        })
        .collect();
    let convs = (0..conversions)
        .map(|_| {
            let line = &lines[rng.random_range(0..n_lines)];
            // Mostly the line's own type, sometimes a mismatch.
            let conv_type = if rng.random_bool(0.9) {
                line.conv_type.clone()
            } else {
                names[rng.random_range(0..t)].clone()
            };
            ConversionRecord {
                timestamp: rng.random_range(0..horizon),
                user_id: format!("u{}", rng.random_range(0..users)),
                line_id: line.line_id.clone(),
                conv_type,
            }
        })
        .collect();
    (imps, convs, lines)
}

/// Largest relative error between the analytic gradient and central
/// differences of the batch objective, over every parameter coordinate.
pub fn gradient_check(params: &ModelParams, batch: &[SparseInstance], train: &mtfwfm::TrainConfig, h: f64) -> f64 {
    use mtfwfm::train::{gradients, loss};
    let g = gradients(params, batch, train).unwrap();
    let rows = params.embeddings.len() / params.config.embed_dim;
    let analytic = [
        g.bias.clone(),
        g.embeddings_dense(rows),
        g.main_weights.clone(),
        g.interactions.clone(),
    ];
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for (tensor, grad) in analytic.iter().enumerate() {
        for (i, &a) in grad.iter().enumerate() {
            let orig = probe.tensors()[tensor][i];
            probe.tensors_mut()[tensor][i] = orig + h;
            let up = loss(&probe, batch, train).unwrap();
            probe.tensors_mut()[tensor][i] = orig - h;
            let down = loss(&probe, batch, train).unwrap();
            probe.tensors_mut()[tensor][i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4);
            worst = worst.max(rel);
        }
    }
    worst
}
