use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

const BIN: &str = env!("CARGO_BIN_EXE_mtfwfm");

fn mtfwfm(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("MTFWFM_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mtfwfm(args);
    assert!(
        out.status.success(),
        "{args:?} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// The bundled planted config, shrunk so a full run takes a few seconds.
fn small_config(dir: &Path) -> String {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/planted.json")).unwrap();
    let mut cfg: Value = serde_json::from_str(&text).unwrap();
    cfg["impressions_per_day"] = json!(1500);
    cfg["num_users"] = json!(2000);
    cfg["max_epochs"] = json!(2);
    let path = dir.join("small.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn end_to_end_pipeline_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = small_config(root);
    let (logs, data) = (root.join("logs"), root.join("data"));
    ok(&["gen-data", "--config", &cfg, "--out", s(&logs)]);
    for f in ["impressions.ndjson", "conversions.ndjson", "lines.ndjson", "truth.json"] {
        assert!(logs.join(f).exists(), "{f}");
    }
    ok(&["prepare", "--config", &cfg, "--input", s(&logs), "--out", s(&data)]);
    for f in ["schema.json", "train.bin", "val.bin", "test.bin", "prepare_report.json"] {
        assert!(data.join(f).exists(), "{f}");
    }

    let (run1, run2) = (root.join("run1"), root.join("run2"));
    ok(&["train", "--config", &cfg, "--data", s(&data), "--out", s(&run1), "--seed", "5"]);
    ok(&["train", "--config", &cfg, "--data", s(&data), "--out", s(&run2), "--seed", "5", "--threads", "2"]);
    for f in ["model.bin", "metrics.json"] {
        assert_eq!(fs::read(run1.join(f)).unwrap(), fs::read(run2.join(f)).unwrap(), "{f} differs");
    }
    let log = fs::read_to_string(run1.join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    let resolved: Value = serde_json::from_str(&fs::read_to_string(run1.join("config.resolved.json")).unwrap()).unwrap();
    assert_eq!(resolved["seed"], json!(5));
    assert_eq!(resolved["command"], json!("train"));

    let model = run1.join("model.bin");
    let table = ok(&["eval", "--config", &cfg, "--data", s(&data), "--model-file", s(&model), "--out", s(&run1)]);
    assert!(table.contains("weighted"), "{table}");
    let eval: Value = serde_json::from_str(&fs::read_to_string(run1.join("eval_test.json")).unwrap()).unwrap();
    let metrics: Value = serde_json::from_str(&fs::read_to_string(run1.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(eval, metrics.as_array().unwrap().last().unwrap().clone());

    let mi_dir = root.join("mi");
    ok(&["analyze-mi", "--config", &cfg, "--data", s(&data), "--out", s(&mi_dir)]);
    assert!(mi_dir.join("mi_type0.csv").exists() && mi_dir.join("mi.json").exists());

    let heat = root.join("heat");
    ok(&["export-heatmaps", "--config", &cfg, "--data", s(&data), "--model-file", s(&model), "--out", s(&heat)]);
    for t in 0..2 {
        assert!(heat.join(format!("r_type{t}.csv")).exists());
        assert!(heat.join(format!("mi_type{t}.svg")).exists());
    }
    assert!(heat.join("correlations.json").exists());

    // A CTF model cannot be exported as per-type heatmaps.
    let ctf = root.join("ctf");
    ok(&["train", "--config", &cfg, "--data", s(&data), "--out", s(&ctf), "--model", "fwfm-ctf2"]);
    let out = mtfwfm(&["export-heatmaps", "--data", s(&data), "--model-file", s(&ctf.join("model.bin")), "--out", s(&heat)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn count_prints_the_reference_total() {
    let out = ok(&["count", "--model", "mt-fwfm", "-T", "4", "-M", "10000", "-N", "17", "-K", "8"]);
    assert_eq!(out.trim(), "81092");
    let ops = ok(&["count", "-T", "4", "-M", "10000", "-N", "17", "-K", "8", "--ops"]);
    assert!(ops.contains("2584"), "{ops}");
    assert!(ops.contains("6136"), "{ops}");
}

#[test]
fn bench_writes_a_consistent_report() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["bench", "-N", "6", "-M", "300", "-T", "2", "-K", "4", "--reps", "2", "--instances", "50", "--out", s(tmp.path())]);
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("complexity.json")).unwrap()).unwrap();
    for kind in report["kinds"].as_array().unwrap() {
        assert_eq!(kind["param_count_formula"], kind["param_count_actual"]);
        assert_eq!(kind["ops_total_formula"], kind["ops_total_instrumented"]);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(mtfwfm(&["--bogus"]).status.code(), Some(1));
    assert_eq!(mtfwfm(&["count", "--model", "nope"]).status.code(), Some(1));
    assert_eq!(mtfwfm(&["--help"]).status.code(), Some(0));

    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nothing-here");
    let out = mtfwfm(&["train", "--data", s(&missing), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));

    let bad_cfg = tmp.path().join("bad.json");
    fs::write(&bad_cfg, r#"{"learning_rate": -1}"#).unwrap();
    let cfg = small_config(tmp.path());
    let (logs, data) = (tmp.path().join("logs"), tmp.path().join("data"));
    ok(&["gen-data", "--config", &cfg, "--out", s(&logs)]);
    ok(&["prepare", "--config", &cfg, "--input", s(&logs), "--out", s(&data)]);
    let out = mtfwfm(&["train", "--config", s(&bad_cfg), "--data", s(&data), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));

    let mut diverge: Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    diverge["learning_rate"] = json!(1e200);
    diverge["init_scale"] = json!(1.0);
    let div_cfg = tmp.path().join("diverge.json");
    fs::write(&div_cfg, diverge.to_string()).unwrap();
    let out = mtfwfm(&["train", "--config", s(&div_cfg), "--data", s(&data), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let out = mtfwfm(&["eval", "--data", s(&data), "--model-file", s(&data.join("schema.json")), "--split", "nope", "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
}
