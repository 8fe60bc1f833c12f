//! Parameter and operation counts, checked against allocation and against
//! an instrumented forward pass, plus an inference latency benchmark.
//!
//! An operation is one floating add or one floating multiply. A length-`K`
//! dot product therefore costs `2K - 1`. The sigmoid and memory traffic are
//! not counted.

use std::hint::black_box;
use std::time::Instant;

use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::forward::SlotView;
use crate::model::{pairs, ModelConfig, ModelKind, ModelParams, SparseInstance};
use crate::scalar::{self, Counted, OpTally};

/// Closed-form number of learnable scalars.
///
/// For MT-FwFM this is `T + MK + NTK + C(N,2)·T`. The CTF kinds have one
/// bias, `M+T` embeddings, `N+1` main vectors and, for the field-weighted
/// kinds, `C(N+1,2)` (2-way) or `C(N,2)` (3-way) interaction weights.
pub fn count_params(config: &ModelConfig) -> usize {
    count_params_for(
        config.kind,
        config.num_fields(),
        config.num_features(),
        config.num_types,
        config.embed_dim,
    )
}

/// [`count_params`] from raw sizes, with no requirement that a model of that
/// shape can be built.
pub fn count_params_for(kind: ModelKind, n: usize, m: usize, t: usize, k: usize) -> usize {
    match kind {
        ModelKind::MtFwfm => t + m * k + n * t * k + pairs(n) * t,
        ModelKind::FmCtf2 => 1 + (m + t) * k + (n + 1) * k,
        ModelKind::FwfmCtf2 => 1 + (m + t) * k + (n + 1) * k + pairs(n + 1),
        ModelKind::FwfmCtf3 => 1 + (m + t) * k + (n + 1) * k + pairs(n),
    }
}

/// Operation count of each part of one forward score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpComponents {
    pub main: u64,
    /// 2-way interaction term.
    pub interaction: u64,
    pub three_way: u64,
    /// Adds joining the bias and the terms above.
    pub combine: u64,
}

impl OpComponents {
    pub fn total(&self) -> u64 {
        self.main + self.interaction + self.three_way + self.combine
    }
}

fn c2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Component counts for `N` base fields and embedding size `K`.
///
/// For MT-FwFM, `main = N(2K-1) + (N-1)` and
/// `interaction = C(N,2)·2K + C(N,2) - 1`.
pub fn op_components(kind: ModelKind, n: usize, k: usize) -> OpComponents {
    let (n, k) = (n as u64, k as u64);
    let fields = if kind.is_ctf() { n + 1 } else { n };
    let main = fields * (2 * k - 1) + (fields - 1);
    let p = c2(fields);
    match kind {
        ModelKind::MtFwfm | ModelKind::FwfmCtf2 => OpComponents {
            main,
            interaction: p * 2 * k + p - 1,
            three_way: 0,
            combine: 2,
        },
        ModelKind::FmCtf2 => OpComponents {
            main,
            interaction: p * (2 * k - 1) + p - 1,
            three_way: 0,
            combine: 2,
        },
        ModelKind::FwfmCtf3 => OpComponents {
            main,
            interaction: p * (2 * k - 1) + p - 1,
            three_way: c2(n) * 3 * k + c2(n) - 1,
            combine: 3,
        },
    }
}

/// MT-FwFM operation counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MtOpCounts {
    pub main: u64,
    pub interaction: u64,
    /// Closed-form total `N²K + NK + C(N,2)`.
    pub total_formula: u64,
    /// `main + interaction`, without the adds that join the terms.
    pub component_sum: u64,
}

pub fn count_ops(n: usize, k: usize) -> MtOpCounts {
    let c = op_components(ModelKind::MtFwfm, n, k);
    let (nn, kk) = (n as u64, k as u64);
    MtOpCounts {
        main: c.main,
        interaction: c.interaction,
        total_formula: nn * nn * kk + nn * kk + c2(nn),
        component_sum: c.main + c.interaction,
    }
}

/// 3-way CTF FwFM operation count, `(5/2·N² + 3/2·N + 2)·K + C(N,2)`.
pub fn count_ops_3way(n: usize, k: usize) -> u64 {
    let (n, k) = (n as u64, k as u64);
    (5 * n * n + 3 * n + 4) * k / 2 + c2(n)
}

/// Runs the production forward kernels on [`Counted`] scalars for one
/// instance and returns the per-component tallies.
pub fn instrumented_ops(
    params: &ModelParams,
    inst: &SparseInstance,
) -> Result<(f64, [OpTally; 4])> {
    let rows = inst.rows(&params.config)?;
    let slot = params.slot(inst.conv_type);
    let wrap = |v: &[f64]| v.iter().map(|&x| Counted(x)).collect::<Vec<_>>();
    let embeddings = wrap(&params.embeddings);
    let main = wrap(params.main_slot(slot));
    let inter = params.interaction_slot(slot).map(wrap);
    let view = SlotView {
        k: params.embed_dim(),
        bias: Counted(params.bias[slot]),
        embeddings: &embeddings,
        main: &main,
        interactions: inter.as_deref(),
    };
    let kind = params.kind();
    let (main_v, t_main) = scalar::count_ops(|| view.main_term(&rows));
    let (pair_v, t_pair) = scalar::count_ops(|| match kind {
        ModelKind::FwfmCtf2 | ModelKind::MtFwfm => {
            view.pairwise_term(&rows, rows.len(), view.interactions)
        }
        ModelKind::FmCtf2 | ModelKind::FwfmCtf3 => view.pairwise_term(&rows, rows.len(), None),
    });
    let (three_v, t_three) = scalar::count_ops(|| {
        (kind == ModelKind::FwfmCtf3)
            .then(|| view.three_way_term(&rows, view.interactions.expect("3-way weights")))
    });
    let terms = crate::model::Terms {
        bias: view.bias,
        main: main_v,
        pairwise: pair_v,
        three_way: three_v,
    };
    let (phi, t_comb) = scalar::count_ops(|| terms.combine());
    Ok((phi.0, [t_main, t_pair, t_three, t_comb]))
}

/// Instrumented counts in [`OpComponents`] form.
pub fn instrumented_components(params: &ModelParams, inst: &SparseInstance) -> Result<OpComponents> {
    let (_, [m, p, t, c]) = instrumented_ops(params, inst)?;
    Ok(OpComponents {
        main: m.total(),
        interaction: p.total(),
        three_way: t.total(),
        combine: c.total(),
    })
}

/// Parameters with every tensor drawn uniformly from `[-1, 1]`.
pub fn random_params(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v = dist.sample(&mut rng);
        }
    }
    Ok(params)
}

/// Uniformly random field-aligned instances for `config`.
pub fn random_instances(config: &ModelConfig, count: usize, seed: u64) -> Vec<SparseInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets = config.field_offsets();
    (0..count)
        .map(|_| {
            let active = (0..config.num_fields())
                .map(|f| rng.random_range(offsets[f]..offsets[f + 1]))
                .collect();
            let t = rng.random_range(0..config.num_types as u32);
            SparseInstance::new(active, t, rng.random())
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub reps: usize,
    pub instances: usize,
    pub median_ns: f64,
    pub p99_ns: f64,
    pub mean_ns: f64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() as f64 * q).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Per-inference latency on the calling thread.
///
/// One warm-up pass is made over `instances`; each of the `reps` timed passes
/// then yields one per-inference sample (pass time divided by the number of
/// instances). Median and p99 are taken over those samples.
pub fn bench_inference(
    params: &ModelParams,
    instances: &[SparseInstance],
    reps: usize,
) -> Result<LatencyStats> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be >= 1".into()));
    }
    if instances.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for inst in instances {
        black_box(params.phi(black_box(inst))?);
    }
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        for inst in instances {
            black_box(params.phi(black_box(inst))?);
        }
        samples.push(start.elapsed().as_nanos() as f64 / instances.len() as f64);
    }
    let mean = samples.iter().sum::<f64>() / reps as f64;
    samples.sort_by(f64::total_cmp);
    Ok(LatencyStats {
        reps,
        instances: instances.len(),
        median_ns: percentile(&samples, 0.5),
        p99_ns: percentile(&samples, 0.99),
        mean_ns: mean,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindReport {
    pub kind: ModelKind,
    pub param_count_formula: usize,
    pub param_count_actual: usize,
    pub ops_formula: OpComponents,
    pub ops_instrumented: OpComponents,
    pub ops_total_formula: u64,
    pub ops_total_instrumented: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub num_fields: usize,
    pub num_features: usize,
    pub num_types: usize,
    pub embed_dim: usize,
    pub mt: MtOpCounts,
    pub ops_3way_formula: u64,
    pub ops_ratio_3way_over_mt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_ratio_3way_over_mt: Option<f64>,
    pub kinds: Vec<KindReport>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchSettings {
    pub instances: usize,
    pub reps: usize,
    pub seed: u64,
}

/// Formula, allocation and instrumentation counts for all four kinds at
/// `(N, M, T, K)`, with optional latency measurements.
pub fn complexity_report(
    n: usize,
    m: usize,
    t: usize,
    k: usize,
    bench: Option<BenchSettings>,
) -> Result<ComplexityReport> {
    let seed = bench.map_or(0, |b| b.seed);
    let mut kinds = Vec::new();
    for kind in ModelKind::ALL {
        let config = ModelConfig::uniform(kind, n, m, t, k)?;
        let params = random_params(&config, seed)?;
        let probe = random_instances(&config, 1, seed ^ 0x5eed);
        let ops_formula = op_components(kind, n, k);
        let ops_instrumented = instrumented_components(&params, &probe[0])?;
        let latency = match bench {
            Some(b) => {
                let data = random_instances(&config, b.instances, b.seed);
                Some(bench_inference(&params, &data, b.reps)?)
            }
            None => None,
        };
        kinds.push(KindReport {
            kind,
            param_count_formula: count_params(&config),
            param_count_actual: params.scalar_count(),
            ops_total_formula: ops_formula.total(),
            ops_total_instrumented: ops_instrumented.total(),
            ops_formula,
            ops_instrumented,
            latency,
        });
    }
    let mt = count_ops(n, k);
    let ops_3way = count_ops_3way(n, k);
    let latency_of = |kind| {
        kinds
            .iter()
            .find(|r| r.kind == kind)
            .and_then(|r| r.latency)
            .map(|l| l.median_ns)
    };
    let latency_ratio = match (latency_of(ModelKind::FwfmCtf3), latency_of(ModelKind::MtFwfm)) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    Ok(ComplexityReport {
        num_fields: n,
        num_features: m,
        num_types: t,
        embed_dim: k,
        mt,
        ops_3way_formula: ops_3way,
        ops_ratio_3way_over_mt: ops_3way as f64 / mt.total_formula as f64,
        latency_ratio_3way_over_mt: latency_ratio,
        kinds,
    })
}

impl ComplexityReport {
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "N={} M={} T={} K={}\n{:<10} {:>12} {:>12} {:>8} {:>12} {:>12} {:>12}\n",
            self.num_fields,
            self.num_features,
            self.num_types,
            self.embed_dim,
            "model",
            "params",
            "allocated",
            "ops",
            "instrumented",
            "median_ns",
            "p99_ns"
        );
        for r in &self.kinds {
            let (med, p99) = r
                .latency
                .map_or(("-".to_string(), "-".to_string()), |l| {
                    (format!("{:.1}", l.median_ns), format!("{:.1}", l.p99_ns))
                });
            s += &format!(
                "{:<10} {:>12} {:>12} {:>8} {:>12} {:>12} {:>12}\n",
                r.kind.as_str(),
                r.param_count_formula,
                r.param_count_actual,
                r.ops_total_formula,
                r.ops_total_instrumented,
                med,
                p99
            );
        }
        s += &format!(
            "mt-fwfm main={} interaction={} sum={} closed-form total={}\n",
            self.mt.main, self.mt.interaction, self.mt.component_sum, self.mt.total_formula
        );
        s += &format!(
            "fwfm-ctf3 closed-form ops={} ratio over mt-fwfm={:.4}",
            self.ops_3way_formula, self.ops_ratio_3way_over_mt
        );
        if let Some(r) = self.latency_ratio_3way_over_mt {
            s += &format!(" latency ratio={r:.3}");
        }
        s.push('\n');
        s
    }
}
