//! `mtfwfm`: data generation, dataset preparation, training, evaluation,
//! mutual-information analysis, heatmap export and complexity accounting.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mtfwfm::ModelKind;

#[derive(Parser, Debug)]
#[command(name = "mtfwfm", version, about = "Multi-task field-weighted factorization machines")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// Flat JSON config file; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Sequential gradient accumulation for bit-reproducible training.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub deterministic: Option<bool>,
    /// Model kind.
    #[arg(long, global = true)]
    pub model: Option<ModelKind>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate synthetic impression, conversion and line logs.
    GenData,
    /// Attribute, split, downsample and encode logs into datasets.
    Prepare {
        /// Directory holding impressions, conversions and lines logs.
        #[arg(long)]
        input: PathBuf,
    },
    /// Train a model on a prepared dataset directory.
    Train {
        #[arg(long)]
        data: PathBuf,
    },
    /// Score a split with a saved model and report AUCs.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Per-type mutual information of every field pair.
    AnalyzeMi {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "train")]
        split: String,
    },
    /// MI and learned |r| heatmaps per type, with their correlations.
    ExportHeatmaps {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long, default_value = "train")]
        split: String,
    },
    /// Parameter/operation counts and inference latency for all kinds.
    Bench {
        #[command(flatten)]
        dims: Dims,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        instances: Option<usize>,
    },
    /// Print the parameter count of a model shape.
    Count {
        #[command(flatten)]
        dims: Dims,
        /// Also print operation counts.
        #[arg(long)]
        ops: bool,
    },
}

#[derive(Args, Debug, Clone, Copy)]
pub struct Dims {
    /// Number of conversion types.
    #[arg(short = 'T', long = "types")]
    pub types: Option<usize>,
    /// Number of base features.
    #[arg(short = 'M', long = "features")]
    pub features: Option<usize>,
    /// Number of base fields.
    #[arg(short = 'N', long = "fields")]
    pub fields: Option<usize>,
    /// Embedding dimension.
    #[arg(short = 'K', long = "embed-dim")]
    pub embed_dim: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MTFWFM_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
