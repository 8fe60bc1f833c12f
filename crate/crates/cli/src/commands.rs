use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::Serialize;
use serde_json::json;

use mtfwfm::complexity::{complexity_report, count_ops, count_ops_3way, count_params_for, op_components, BenchSettings};
use mtfwfm::data::{
    self, generate_synthetic, load_instances, load_schema, prepare, save_instances, save_schema,
    write_ndjson, Split,
};
use mtfwfm::metrics::scored_samples;
use mtfwfm::mi::{export_heatmaps, export_mi, mutual_information, top_k_pairs, ContingencyCounts, CountOptions};
use mtfwfm::{report, train, FieldSchema, ModelFile, ModelKind, SparseInstance, TypeWeights};

use crate::config::RunConfig;
use crate::{Cli, Command, Dims};

/// Bad invocation or configuration; exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// 1 for usage and configuration errors, 3 for numerical divergence, 2 for
/// everything else (unreadable or inconsistent data).
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<mtfwfm::Error>() {
            return match e {
                mtfwfm::Error::Divergence { .. } => 3,
                mtfwfm::Error::InvalidConfig(_) => 1,
                _ => 2,
            };
        }
    }
    2
}

const LOG_NAMES: [&str; 3] = ["impressions", "conversions", "lines"];
const LOG_EXTENSIONS: [&str; 5] = ["ndjson", "ndjson.gz", "jsonl", "csv", "csv.gz"];
const SCHEMA_FILE: &str = "schema.json";

fn split_file(split: Split) -> String {
    format!("{}.bin", split.as_str())
}

fn parse_split(s: &str) -> Result<Split> {
    Split::ALL
        .into_iter()
        .find(|sp| sp.as_str() == s)
        .ok_or_else(|| usage(format!("unknown split `{s}` (expected train, val or test)")))
}

fn out_dir(cli_out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = cli_out
        .clone()
        .ok_or_else(|| usage("this subcommand needs --out <DIR>"))?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn find_log(dir: &Path, name: &str) -> Result<PathBuf> {
    LOG_EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("{name}.{ext}")))
        .find(|p| p.exists())
        .ok_or_else(|| anyhow!("no {name} log in {}", dir.display()))
}

pub fn run(cli: Cli) -> Result<()> {
    let g = cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let mut cfg = RunConfig::load(g.config.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
    cfg.set_opt("seed", g.seed);
    cfg.set_opt("deterministic", g.deterministic);
    cfg.set_opt("model", g.model.map(|k| k.as_str()));

    match cli.command {
        Command::GenData => gen_data(&cfg, &out_dir(&g.out)?),
        Command::Prepare { input } => prepare_cmd(&cfg, &input, &out_dir(&g.out)?),
        Command::Train { data } => train_cmd(&cfg, &data, &out_dir(&g.out)?),
        Command::Eval {
            data,
            model_file,
            split,
        } => eval_cmd(&cfg, &data, &model_file, parse_split(&split)?, &out_dir(&g.out)?),
        Command::AnalyzeMi { data, split } => {
            analyze_mi(&cfg, &data, parse_split(&split)?, &out_dir(&g.out)?)
        }
        Command::ExportHeatmaps {
            data,
            model_file,
            split,
        } => heatmaps(&cfg, &data, &model_file, parse_split(&split)?, &out_dir(&g.out)?),
        Command::Bench {
            dims,
            reps,
            instances,
        } => bench(&cfg, dims, reps, instances, &out_dir(&g.out)?),
        Command::Count { dims, ops } => count(&cfg, dims, ops),
    }
}

fn typed<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| usage(format!("{e:#}")))
}

fn gen_data(cfg: &RunConfig, out: &Path) -> Result<()> {
    let gen = typed(cfg.generator())?;
    let logs = generate_synthetic(&gen)?;
    write_ndjson(&out.join("impressions.ndjson"), &logs.impressions)?;
    write_ndjson(&out.join("conversions.ndjson"), &logs.conversions)?;
    write_ndjson(&out.join("lines.ndjson"), &logs.lines)?;
    let positives = logs.truth.converted.iter().filter(|&&c| c).count();
    write_json(
        &out.join("truth.json"),
        &json!({
            "impressions": logs.impressions.len(),
            "converted": positives,
            "planted": logs.truth.planted,
        }),
    )?;
    cfg.write_snapshot(out, "gen-data")?;
    log::info!(
        "wrote {} impressions and {} conversions to {}",
        logs.impressions.len(),
        logs.conversions.len(),
        out.display()
    );
    Ok(())
}

fn prepare_cmd(cfg: &RunConfig, input: &Path, out: &Path) -> Result<()> {
    let pc = typed(cfg.pipeline())?;
    let [imp, conv, lines] = LOG_NAMES.map(|n| find_log(input, n));
    let impressions = data::read_impressions(&imp?)?;
    let conversions = data::read_conversions(&conv?)?;
    let lines = data::read_lines(&lines?)?;
    let prepared = prepare(&impressions, &conversions, &lines, &pc)?;
    save_schema(&out.join(SCHEMA_FILE), &prepared.schema)?;
    for split in Split::ALL {
        save_instances(&out.join(split_file(split)), &prepared.schema, prepared.split(split))?;
    }
    write_json(&out.join("prepare_report.json"), &prepared.report)?;
    cfg.write_snapshot(out, "prepare")?;
    println!("{:<6} {:>10} {:>10} {:>10}", "split", "samples", "positives", "features");
    for (split, s) in &prepared.report.splits {
        println!(
            "{:<6} {:>10} {:>10} {:>10}",
            split.as_str(),
            s.overall.samples,
            s.overall.positives,
            s.overall.features
        );
    }
    Ok(())
}

struct Dataset {
    schema: FieldSchema,
    dir: PathBuf,
}

impl Dataset {
    fn open(dir: &Path) -> Result<Self> {
        Ok(Dataset {
            schema: load_schema(&dir.join(SCHEMA_FILE))?,
            dir: dir.to_path_buf(),
        })
    }

    fn load(&self, split: Split) -> Result<Vec<SparseInstance>> {
        Ok(load_instances(&self.dir.join(split_file(split)), &self.schema)?)
    }

    fn load_if_present(&self, split: Split) -> Result<Vec<SparseInstance>> {
        if self.dir.join(split_file(split)).exists() {
            self.load(split)
        } else {
            Ok(Vec::new())
        }
    }

    fn load_model(&self, path: &Path) -> Result<ModelFile> {
        let model = ModelFile::load(path)?;
        if model.schema != self.schema.digest() {
            return Err(mtfwfm::Error::format(
                "model file",
                format!("{} was trained on a different schema", path.display()),
            )
            .into());
        }
        Ok(model)
    }
}

/// Metrics of one split, with type ids resolved to names.
#[derive(Serialize)]
struct SplitMetrics {
    split: Split,
    type_names: Vec<String>,
    #[serde(flatten)]
    report: mtfwfm::MetricsReport,
}

fn type_weights(cfg: &RunConfig, schema: &FieldSchema, samples: &[mtfwfm::ScoredSample]) -> Result<TypeWeights> {
    match cfg.get::<BTreeMap<String, f64>>("type_weights").map_err(|e| usage(format!("{e:#}")))? {
        None => Ok(TypeWeights::from_counts(samples)),
        Some(named) => {
            let mut w = BTreeMap::new();
            for (name, weight) in named {
                let t = schema
                    .type_id(&name)
                    .ok_or(mtfwfm::Error::UnknownConvType(name))?;
                w.insert(t, weight);
            }
            Ok(TypeWeights(w))
        }
    }
}

fn evaluate(
    cfg: &RunConfig,
    model: &ModelFile,
    schema: &FieldSchema,
    data: &[SparseInstance],
    split: Split,
) -> Result<SplitMetrics> {
    let samples = scored_samples(&model.params.predict_all(data)?, data);
    let weights = type_weights(cfg, schema, &samples)?;
    Ok(SplitMetrics {
        split,
        type_names: schema.type_names().to_vec(),
        report: report(&samples, &weights)?,
    })
}

fn train_cmd(cfg: &RunConfig, data_dir: &Path, out: &Path) -> Result<()> {
    let ds = Dataset::open(data_dir)?;
    let tc = typed(cfg.train())?;
    let kind = cfg.get::<ModelKind>("model").map_err(|e| usage(format!("{e:#}")))?;
    let kind = kind.unwrap_or(ModelKind::MtFwfm);
    let k = typed(cfg.get::<usize>("embed_dim"))?.unwrap_or(4);
    let mc = ds.schema.model_config(kind, k)?;
    let train_set = ds.load(Split::Train)?;
    let val = ds.load_if_present(Split::Val)?;
    let test = ds.load_if_present(Split::Test)?;
    log::info!(
        "training {kind} (K={k}) on {} samples, {} validation",
        train_set.len(),
        val.len()
    );
    let (params, log) = train(&train_set, &val, &mc, &tc)?;
    let model = ModelFile::new(params, ds.schema.digest())?;
    model.save(&out.join("model.bin"))?;
    fs::write(out.join("train_log.jsonl"), log.to_jsonl()).context("writing train_log.jsonl")?;

    let mut metrics = Vec::new();
    for (split, data) in [(Split::Val, &val), (Split::Test, &test)] {
        if !data.is_empty() {
            metrics.push(evaluate(cfg, &model, &ds.schema, data, split)?);
        }
    }
    write_json(&out.join("metrics.json"), &metrics)?;
    cfg.write_snapshot(out, "train")?;
    log::info!("selected epoch {} of {}", log.selected_epoch, log.epochs.len());
    if let Some(m) = metrics.last() {
        print!("{}", m.report.to_table(Some(&m.type_names)));
    }
    Ok(())
}

fn eval_cmd(cfg: &RunConfig, data_dir: &Path, model_path: &Path, split: Split, out: &Path) -> Result<()> {
    let ds = Dataset::open(data_dir)?;
    let model = ds.load_model(model_path)?;
    let data = ds.load(split)?;
    let m = evaluate(cfg, &model, &ds.schema, &data, split)?;
    write_json(&out.join(format!("eval_{}.json", split.as_str())), &m)?;
    cfg.write_snapshot(out, "eval")?;
    print!("{}", m.report.to_table(Some(&m.type_names)));
    Ok(())
}

fn mi_table(cfg: &RunConfig, ds: &Dataset, split: Split) -> Result<mtfwfm::mi::MiTable> {
    let data = ds.load(split)?;
    let options = CountOptions {
        max_cells_per_pair: typed(cfg.get("max_cells_per_pair"))?,
    };
    let counts = ContingencyCounts::count_par(&data, ds.schema.num_fields(), ds.schema.num_types(), options)?;
    Ok(mutual_information(&counts))
}

fn analyze_mi(cfg: &RunConfig, data_dir: &Path, split: Split, out: &Path) -> Result<()> {
    let ds = Dataset::open(data_dir)?;
    let mi = mi_table(cfg, &ds, split)?;
    let top_k: usize = typed(cfg.get("top_k"))?.unwrap_or(3);
    let fields = ds.schema.fields();
    export_mi(&mi, fields, out)?;
    let mut top = BTreeMap::new();
    for (t, name) in ds.schema.type_names().iter().enumerate() {
        if mi.matrix(t as u32).is_none() {
            continue;
        }
        let ranked = top_k_pairs(&mi, t as u32, top_k)?;
        println!("{name}:");
        for r in &ranked {
            println!("  {:<24} {:<24} {:.6}", fields[r.p], fields[r.q], r.mi);
        }
        top.insert(name.clone(), ranked);
    }
    write_json(
        &out.join("mi.json"),
        &json!({ "split": split, "fields": fields, "type_names": ds.schema.type_names(), "mi": mi, "top_pairs": top }),
    )?;
    cfg.write_snapshot(out, "analyze-mi")
}

fn heatmaps(cfg: &RunConfig, data_dir: &Path, model_path: &Path, split: Split, out: &Path) -> Result<()> {
    let ds = Dataset::open(data_dir)?;
    let model = ds.load_model(model_path)?;
    let mi = mi_table(cfg, &ds, split)?;
    let exported = export_heatmaps(&mi, &model.params, ds.schema.fields(), out)?;
    cfg.write_snapshot(out, "export-heatmaps")?;
    for (t, corr) in &exported.correlations {
        let name = &ds.schema.type_names()[*t as usize];
        match corr {
            Some(c) => println!("{name}: pearson(MI, |r|) = {c:.4}"),
            None => println!("{name}: pearson(MI, |r|) undefined"),
        }
    }
    log::info!("wrote {} files to {}", exported.files.len(), out.display());
    Ok(())
}

/// `(N, M, T, K)` from flags, then config keys, then the reference shape.
fn resolve_dims(cfg: &RunConfig, d: Dims) -> Result<(usize, usize, usize, usize)> {
    let pick = |flag: Option<usize>, key: &str, default: usize| -> Result<usize> {
        Ok(match flag {
            Some(v) => v,
            None => typed(cfg.get(key))?.unwrap_or(default),
        })
    };
    Ok((
        pick(d.fields, "num_fields", 17)?,
        pick(d.features, "num_features", 10_000)?,
        pick(d.types, "num_types", 4)?,
        pick(d.embed_dim, "embed_dim", 8)?,
    ))
}

fn bench(cfg: &RunConfig, dims: Dims, reps: Option<usize>, instances: Option<usize>, out: &Path) -> Result<()> {
    let (n, m, t, k) = resolve_dims(cfg, dims)?;
    let settings = BenchSettings {
        reps: match reps {
            Some(r) => r,
            None => typed(cfg.get("bench_reps"))?.unwrap_or(20),
        },
        instances: match instances {
            Some(i) => i,
            None => typed(cfg.get("bench_instances"))?.unwrap_or(10_000),
        },
        seed: typed(cfg.get("seed"))?.unwrap_or(0),
    };
    let rep = complexity_report(n, m, t, k, Some(settings))?;
    write_json(&out.join("complexity.json"), &rep)?;
    cfg.write_snapshot(out, "bench")?;
    print!("{}", rep.to_table());
    Ok(())
}

fn count(cfg: &RunConfig, dims: Dims, ops: bool) -> Result<()> {
    let kind = typed(cfg.get::<ModelKind>("model"))?.unwrap_or(ModelKind::MtFwfm);
    let (n, m, t, k) = resolve_dims(cfg, dims)?;
    if n < 2 || k == 0 || t == 0 {
        return Err(usage("count needs N >= 2, K >= 1 and T >= 1"));
    }
    println!("{}", count_params_for(kind, n, m, t, k));
    if ops {
        let c = op_components(kind, n, k);
        println!(
            "ops main={} interaction={} three_way={} combine={} total={}",
            c.main,
            c.interaction,
            c.three_way,
            c.combine,
            c.total()
        );
        let mt = count_ops(n, k);
        let three = count_ops_3way(n, k);
        println!(
            "mt-fwfm closed-form total={} fwfm-ctf3 closed-form total={} ratio={:.4}",
            mt.total_formula,
            three,
            three as f64 / mt.total_formula as f64
        );
    }
    Ok(())
}
