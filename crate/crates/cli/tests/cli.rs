//! End-to-end tests of the `btof` binary: artifact contracts, exit codes,
//! and output determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn btof() -> Command {
    Command::new(env!("CARGO_BIN_EXE_btof"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    btof()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn synth_csv(dir: &Path, name: &str, items: usize, periods: usize, seed: u64) -> PathBuf {
    let out = run_in(
        dir,
        &[
            "synth",
            "--items",
            &items.to_string(),
            "--periods",
            &periods.to_string(),
            "--rho",
            "0.9",
            "--seed",
            &seed.to_string(),
            "--out",
            name,
        ],
    );
    assert_success(&out);
    dir.join(name)
}

#[test]
fn synth_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth_csv(dir.path(), "a.csv", 10, 20, 7);
    let b = synth_csv(dir.path(), "b.csv", 10, 20, 7);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = synth_csv(dir.path(), "c.csv", 10, 20, 8);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn corr_writes_both_tables_and_leaves_input_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let input = synth_csv(dir.path(), "d.csv", 12, 30, 3);
    let before = fs::read(&input).unwrap();
    let out = run_in(
        dir.path(),
        &[
            "corr",
            "--input",
            "d.csv",
            "--differenced",
            "--min-nonzero-frac",
            "0.5",
            "--out-dir",
            "corr",
        ],
    );
    assert_success(&out);
    let gross = fs::read_to_string(dir.path().join("corr/corr_gross.csv")).unwrap();
    let net = fs::read_to_string(dir.path().join("corr/corr_differenced.csv")).unwrap();
    assert!(gross.starts_with("slot,x0"));
    assert!(net.starts_with("slot,x0"));
    assert!(dir.path().join("corr/corr.manifest.json").exists());
    assert_eq!(before, fs::read(&input).unwrap(), "input file was mutated");
}

#[test]
fn transform_emits_dataset_with_layout_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    synth_csv(dir.path(), "d.csv", 8, 25, 5);
    let out = run_in(
        dir.path(),
        &[
            "transform",
            "--input",
            "d.csv",
            "--lags",
            "1",
            "--out",
            "dataset.csv",
        ],
    );
    assert_success(&out);
    let data = fs::read_to_string(dir.path().join("dataset.csv")).unwrap();
    assert!(data.starts_with("item,t,x0"));
    assert!(data.contains("lag1_h0"));
    let layout: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("dataset.layout.json")).unwrap())
            .unwrap();
    assert_eq!(layout["horizon"], 4);
    assert_eq!(layout["x"].as_array().unwrap().len(), 14);
    assert_eq!(layout["y"].as_array().unwrap().len(), 10);
    // first y slot is the next period's earliest future volume
    assert_eq!(layout["y"][0]["period_offset"], 1);
    assert_eq!(layout["y"][0]["delivery_date"], 0);
}

fn write_train_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const SMALL_TRAIN: &str = r#"
input = "d.csv"
out_dir = "run"
min_nonzero_frac = 0.5
threads = 2
mode = "df_all_items"
transform = "identity"
dev_periods = 24
holdout_periods = 5
folds = 4
seed = 42

[[grid]]
family = "ridge"
lambda = 0.1

[[grid]]
family = "ridge"
lambda = 1.0
"#;

#[test]
fn train_writes_the_full_artifact_set_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    synth_csv(dir.path(), "d.csv", 10, 32, 9);
    write_train_config(dir.path(), "c.toml", SMALL_TRAIN);

    let out = run_in(dir.path(), &["train", "--config", "c.toml"]);
    assert_success(&out);
    for artifact in [
        "run/report.json",
        "run/scores.csv",
        "run/summary.csv",
        "run/model_ridge.json",
        "run/train.manifest.json",
    ] {
        assert!(dir.path().join(artifact).exists(), "{artifact} missing");
    }
    let first = fs::read(dir.path().join("run/report.json")).unwrap();

    // rerun with a different worker count into a fresh directory
    let retoml = SMALL_TRAIN
        .replace("out_dir = \"run\"", "out_dir = \"run2\"")
        .replace("threads = 2", "threads = 1");
    write_train_config(dir.path(), "c2.toml", &retoml);
    let out = run_in(dir.path(), &["train", "--config", "c2.toml"]);
    assert_success(&out);
    let second = fs::read(dir.path().join("run2/report.json")).unwrap();
    assert_eq!(first, second, "report.json differs across runs");
}

#[test]
fn gbt_suite_is_most_accurate_on_the_next_periods_volume() {
    let dir = tempfile::tempdir().unwrap();
    synth_csv(dir.path(), "d.csv", 15, 40, 7);
    write_train_config(
        dir.path(),
        "gbt.toml",
        r#"
input = "d.csv"
out_dir = "run"
min_nonzero_frac = 0.5
threads = 4
mode = "df_all_items"
transform = "identity"
dev_periods = 30
holdout_periods = 6
folds = 4
seed = 42

[[grid]]
family = "gbt"
n_trees = 40
max_depth = 2
"#,
    );
    let out = run_in(dir.path(), &["train", "--config", "gbt.toml"]);
    assert_success(&out);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/report.json")).unwrap())
            .unwrap();
    let gbt = report["methods"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["method"] == "gbt")
        .expect("gbt method row");
    let s_j: Vec<f64> = gbt["s_j"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(s_j.len(), 10);
    let slot0 = s_j[0];
    for (j, &s) in s_j.iter().enumerate().skip(1) {
        assert!(
            slot0 <= s,
            "slot0 {slot0} should be the most accurate, but slot {j} = {s}"
        );
    }
}

#[test]
fn evaluate_reproduces_the_trained_holdout_scores() {
    let dir = tempfile::tempdir().unwrap();
    synth_csv(dir.path(), "d.csv", 10, 32, 9);
    write_train_config(dir.path(), "c.toml", SMALL_TRAIN);
    assert_success(&run_in(dir.path(), &["train", "--config", "c.toml"]));

    let out = run_in(
        dir.path(),
        &[
            "evaluate",
            "--model",
            "run/model_ridge.json",
            "--input",
            "d.csv",
            "--holdout-periods",
            "5",
            "--out-dir",
            "eval",
        ],
    );
    assert_success(&out);
    let eval_scores = fs::read_to_string(dir.path().join("eval/eval_scores.csv")).unwrap();
    let trained_scores = fs::read_to_string(dir.path().join("run/scores.csv")).unwrap();
    // the ridge rows of the training scores must reappear identically
    let ridge_rows: Vec<&str> = trained_scores
        .lines()
        .filter(|l| l.starts_with("ridge,"))
        .collect();
    assert!(!ridge_rows.is_empty());
    for row in ridge_rows {
        assert!(
            eval_scores.contains(row),
            "missing holdout row: {row}\n{eval_scores}"
        );
    }
}

#[test]
fn report_verifies_and_regenerates_summaries() {
    let dir = tempfile::tempdir().unwrap();
    synth_csv(dir.path(), "d.csv", 10, 32, 9);
    write_train_config(dir.path(), "c.toml", SMALL_TRAIN);
    assert_success(&run_in(dir.path(), &["train", "--config", "c.toml"]));

    let out = run_in(
        dir.path(),
        &["report", "--input", "run/report.json", "--out-dir", "rep"],
    );
    assert_success(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("aggregates verified"));
    let original = fs::read(dir.path().join("run/summary.csv")).unwrap();
    let regenerated = fs::read(dir.path().join("rep/summary.csv")).unwrap();
    assert_eq!(original, regenerated);
}

#[test]
fn unknown_flags_and_missing_files_fail_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["synth", "--no-such-flag"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.to_lowercase().contains("usage"), "{stderr}");

    let out = run_in(
        dir.path(),
        &["ingest", "--input", "missing_orders.csv", "--out-dir", "x"],
    );
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("missing_orders.csv"), "{stderr}");
}

#[test]
fn malformed_rows_are_rejected_with_a_line_number() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.csv"),
        "item_code,period,delivery_date,quantity\nA,0,0,5\nA,0,9,5\n",
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &["ingest", "--input", "bad.csv", "--out-dir", "x"],
    );
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("delivery_date 9 out of range") && stderr.contains("line 3"),
        "{stderr}"
    );
}

#[test]
fn ingest_and_summarize_write_the_figure_data() {
    let dir = tempfile::tempdir().unwrap();
    synth_csv(dir.path(), "d.csv", 8, 25, 4);
    assert_success(&run_in(
        dir.path(),
        &["ingest", "--input", "d.csv", "--out-dir", "ing"],
    ));
    for artifact in [
        "ing/cube.csv",
        "ing/zeros_per_item.csv",
        "ing/quantity_by_delivery.csv",
        "ing/ingest.manifest.json",
    ] {
        assert!(dir.path().join(artifact).exists(), "{artifact} missing");
    }
    let zeros = fs::read_to_string(dir.path().join("ing/zeros_per_item.csv")).unwrap();
    assert!(zeros.starts_with("item_code,zero_periods,total_periods"));
    let qty = fs::read_to_string(dir.path().join("ing/quantity_by_delivery.csv")).unwrap();
    assert!(qty.starts_with("period,delivery_0,delivery_1,delivery_2,delivery_3"));

    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("ing/ingest.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "ingest");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn net_semantics_inputs_are_accumulated_to_gross() {
    let dir = tempfile::tempdir().unwrap();
    // net bookings (3,3,3,1) accumulate to the gross row (10,7,4,1)
    fs::write(
        dir.path().join("net.csv"),
        "item_code,period,delivery_date,quantity\n\
         A,0,0,3\nA,0,1,3\nA,0,2,3\nA,0,3,1\nA,1,0,2\n",
    )
    .unwrap();
    assert_success(&run_in(
        dir.path(),
        &[
            "ingest",
            "--input",
            "net.csv",
            "--semantics",
            "net",
            "--out-dir",
            "ing",
        ],
    ));
    let cube = fs::read_to_string(dir.path().join("ing/cube.csv")).unwrap();
    for row in ["A,0,0,10", "A,0,1,7", "A,0,2,4", "A,0,3,1", "A,1,0,2"] {
        assert!(cube.contains(row), "missing {row} in:\n{cube}");
    }
}

#[test]
fn train_threads_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    synth_csv(dir.path(), "d.csv", 8, 32, 9);
    write_train_config(dir.path(), "c.toml", SMALL_TRAIN);
    assert_success(&run_in(
        dir.path(),
        &["train", "--config", "c.toml", "--threads", "3"],
    ));
    let base = fs::read(dir.path().join("run/report.json")).unwrap();

    let retoml = SMALL_TRAIN.replace("out_dir = \"run\"", "out_dir = \"run2\"");
    write_train_config(dir.path(), "c2.toml", &retoml);
    assert_success(&run_in(
        dir.path(),
        &["train", "--config", "c2.toml", "--threads", "1"],
    ));
    let single = fs::read(dir.path().join("run2/report.json")).unwrap();
    assert_eq!(base, single);
}

#[test]
fn config_defaults_print_a_parseable_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["config", "--defaults"]);
    assert_success(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let parsed: toml::Value = toml::from_str(&text).unwrap();
    assert_eq!(parsed["dev_periods"].as_integer(), Some(37));
    assert_eq!(parsed["holdout_periods"].as_integer(), Some(8));
    assert_eq!(parsed["folds"].as_integer(), Some(10));
    let grid = parsed["grid"].as_array().unwrap();
    assert!(grid.iter().any(|g| g["family"].as_str() == Some("gbt")
        && g["n_trees"].as_integer() == Some(500)));
    assert!(grid.iter().any(|g| g["family"].as_str() == Some("mlp")));
}
