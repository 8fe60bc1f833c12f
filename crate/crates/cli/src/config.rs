//! Run configuration: a flat JSON object whose keys are read by the
//! subcommands that understand them. Precedence, lowest first: built-in
//! defaults, the `--config` file, command-line flags.

use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use mtfwfm::data::{GenConfig, PipelineConfig};
use mtfwfm::TrainConfig;

/// Every key some subcommand reads. Others trigger a warning.
const KNOWN_KEYS: &[&str] = &[
    // generator
    "type_names", "fields", "planted", "base_rates", "type_share", "num_users",
    "lines_per_type", "days", "impressions_per_day", "window_days", "start_ts",
    // pipeline
    "train_days", "val_days", "test_days", "attribution_window_days", "keep_prob",
    "per_type_keep", "min_feature_freq",
    // model and training
    "model", "embed_dim", "learning_rate", "reg_lambda", "reg_kind", "batch_size",
    "max_epochs", "init_scale", "interaction_init", "deterministic", "early_stop_patience", "sampling",
    // evaluation and analysis
    "type_weights", "top_k", "max_cells_per_pair",
    // complexity
    "num_fields", "num_features", "num_types", "bench_instances", "bench_reps",
    // shared
    "seed",
];

#[derive(Clone, Debug, Default)]
pub struct RunConfig(pub Map<String, Value>);

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let value: Value = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        match value {
            Value::Object(map) => {
                for key in map.keys().filter(|k| !KNOWN_KEYS.contains(&k.as_str())) {
                    log::warn!("config key `{key}` is not used by any subcommand");
                }
                Ok(RunConfig(map))
            }
            _ => anyhow::bail!("config {} must be a JSON object", path.display()),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.0.insert(key.to_string(), value.into());
    }

    pub fn set_opt<T: Into<Value>>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        self.0
            .get(key)
            .map(|v| serde_json::from_value(v.clone()).with_context(|| format!("config key `{key}`")))
            .transpose()
    }

    fn typed<T: DeserializeOwned>(&self, what: &str) -> Result<T> {
        serde_json::from_value(Value::Object(self.0.clone()))
            .with_context(|| format!("reading {what} settings from config"))
    }

    pub fn generator(&self) -> Result<GenConfig> {
        self.typed("generator")
    }

    /// Pipeline settings. `fields` may be given as names or as generator
    /// field objects, whose `name` is used.
    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let mut map = self.0.clone();
        if let Some(Value::Array(fields)) = map.get_mut("fields") {
            for f in fields.iter_mut() {
                if let Some(name) = f.get("name").cloned() {
                    *f = name;
                }
            }
        }
        serde_json::from_value(Value::Object(map)).context("reading pipeline settings from config")
    }

    pub fn train(&self) -> Result<TrainConfig> {
        self.typed("training")
    }

    pub fn write_snapshot(&self, dir: &Path, command: &str) -> Result<()> {
        let mut map = self.0.clone();
        map.insert("command".into(), command.into());
        let path = dir.join("config.resolved.json");
        std::fs::write(&path, serde_json::to_string_pretty(&Value::Object(map))? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }
}
