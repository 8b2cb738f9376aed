//! End-to-end checks of the `ragkit` binary, one command at a time.

use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn ragkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ragkit"))
        .args(args)
        .current_dir(dir)
        .env_remove("RAGKIT_THREADS")
        .output()
        .expect("spawn ragkit")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = ragkit(dir, args);
    assert!(
        out.status.success(),
        "ragkit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn synth(dir: &Path, per_class: &str) {
    ok(
        dir,
        &["synth", "--level", "0.05", "--per-class", per_class, "--seed", "3", "--out", "train.jsonl", "--out-test", "test.jsonl"],
    );
}

#[test]
fn synth_writes_balanced_splits_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "5");
    let train = read(&dir.path().join("train.jsonl"));
    assert_eq!(train.lines().count(), 1 + 10);
    assert_eq!(train.matches("\"class0\"").count(), 1 + 5);
    let m = json(&dir.path().join("train.manifest.json"));
    assert_eq!(m["command"], "synth");
    assert_eq!(m["config"]["seed"], 3);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn fit_writes_one_model_per_class_and_counts_calls() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "4");
    ok(dir.path(), &["fit", "--train", "train.jsonl", "--out-dir", "m"]);
    let first = read(&dir.path().join("m/model-class0.json"));
    assert!(dir.path().join("m/model-class1.json").exists());
    let m = json(&dir.path().join("m/fit-manifest.json"));
    assert_eq!(m["counters"]["fit_match_calls.class0"], 3);
    assert_eq!(m["counters"]["fit_match_calls.class1"], 3);
    let ll = m["results"]["classes"]["class0"]["dataset_log_likelihood"].as_f64().unwrap();
    assert!(ll.is_finite() && ll < 0.0);

    ok(dir.path(), &["fit", "--train", "train.jsonl", "--out-dir", "m"]);
    assert_eq!(read(&dir.path().join("m/model-class0.json")), first);
}

#[test]
fn fit_rejects_an_empty_class_as_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = concat!(
        r#"{"node_dim":1,"edge_dim":1,"categories":["a","b"]}"#,
        "\n",
        r#"{"id":"g","label":"a","nodes":[{"id":"x","attr":[0.0]}],"edges":[]}"#,
        "\n"
    );
    std::fs::write(dir.path().join("d.jsonl"), data).unwrap();
    let out = ragkit(dir.path(), &["fit", "--train", "d.jsonl", "--out-dir", "m"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty class"));
}

#[test]
fn embed_writes_raw_standardized_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "3");
    ok(d, &["fit", "--train", "train.jsonl", "--out-dir", "m"]);
    let models = ["m/model-class0.json", "m/model-class1.json"];
    let mut args = vec!["embed", "--models", models[0], models[1], "--data", "train.jsonl", "--out", "e.csv"];
    ok(d, &args);
    let raw = read(&d.join("e.csv"));
    let lines: Vec<&str> = raw.lines().collect();
    assert_eq!(lines[0], "graph_id,label,f0,f1");
    assert_eq!(lines.len(), 1 + 6);
    assert!(d.join("e.std.csv").exists());
    let stats = json(&d.join("e.stats.json"));
    assert_eq!(stats["categories"], serde_json::json!(["class0", "class1"]));
    let m = json(&d.join("e.manifest.json"));
    assert_eq!(m["counters"]["embed_match_calls"], 6 * 2);

    // model order on the command line does not matter; reruns are identical
    args.swap(2, 3);
    ok(d, &args);
    assert_eq!(read(&d.join("e.csv")), raw);
}

#[test]
fn embed_of_three_graphs_and_of_an_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "2");
    ok(d, &["fit", "--train", "train.jsonl", "--out-dir", "m"]);
    let train = read(&d.join("train.jsonl"));
    let three: Vec<&str> = train.lines().take(4).collect();
    std::fs::write(d.join("three.jsonl"), three.join("\n")).unwrap();
    std::fs::write(d.join("none.jsonl"), train.lines().next().unwrap()).unwrap();
    let models = ["--models", "m/model-class0.json", "m/model-class1.json"];

    ok(d, &[&["embed"][..], &models[..], &["--data", "three.jsonl", "--out", "three.csv"]].concat());
    let csv = read(&d.join("three.csv"));
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 4));

    ok(d, &[&["embed"][..], &models[..], &["--data", "none.jsonl", "--out", "none.csv"]].concat());
    assert_eq!(read(&d.join("none.csv")), "graph_id,label,f0,f1\n");
    assert_eq!(read(&d.join("none.std.csv")), "graph_id,label,f0,f1\n");
}

#[test]
fn embed_rejects_mismatched_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "2");
    ok(d, &["fit", "--train", "train.jsonl", "--out-dir", "m"]);
    ok(
        d,
        &["synth", "--per-class", "2", "--node-dim", "3", "--out", "wide.jsonl", "--out-test", "wide-test.jsonl"],
    );
    let out = ragkit(
        d,
        &["embed", "--models", "m/model-class0.json", "m/model-class1.json", "--data", "wide.jsonl", "--out", "x.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch"));
}

fn separable_embeddings(path: &Path, seed: u64) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::from("graph_id,label,f0,f1\n");
    for i in 0..10 {
        for (c, center) in [("a", -5.0), ("b", 5.0)] {
            let x = center + r.random_range(-1.0..1.0);
            let y = -center + r.random_range(-1.0..1.0);
            text.push_str(&format!("{c}{i},{c},{x},{y}\n"));
        }
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn classify_separable_embeddings_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    separable_embeddings(&d.join("train.csv"), 1);
    separable_embeddings(&d.join("test.csv"), 2);
    ok(d, &["classify", "--train-emb", "train.csv", "--test-emb", "test.csv", "--baselines", "ml", "--out-dir", "r"]);
    let m = json(&d.join("r/metrics.json"));
    let lf = &m["classifiers"]["rag_lf"];
    assert_eq!(lf["accuracy"], 1.0);
    assert_eq!(lf["auc"], 1.0);
    assert_eq!(lf["confusion"], serde_json::json!([[10, 0], [0, 10]]));
    assert!(m["significance"]["rag_lf_vs_rag_ml"]["p_value"].as_f64().unwrap() > 0.0);
    let preds = read(&d.join("r/predictions-rag-lf.csv"));
    assert!(preds.starts_with("graph_id,true_label,pred_label,score\n"));
    assert_eq!(preds.lines().count(), 21);
}

#[test]
fn classify_with_all_baselines_writes_three_prediction_sets() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "5");
    ok(d, &["fit", "--train", "train.jsonl", "--out-dir", "m"]);
    let models = ["m/model-class0.json", "m/model-class1.json"];
    ok(d, &["embed", "--models", models[0], models[1], "--data", "train.jsonl", "--out", "tr.csv"]);
    ok(
        d,
        &["embed", "--models", models[0], models[1], "--data", "test.jsonl", "--out", "te.csv", "--stats", "tr.stats.json"],
    );
    ok(
        d,
        &[
            "classify", "--train-emb", "tr.csv", "--test-emb", "te.csv", "--baselines", "knn,ml", "--train-data",
            "train.jsonl", "--test-data", "test.jsonl", "--knn-k", "1,3", "--out-dir", "r",
        ],
    );
    for name in ["rag-lf", "rag-ml", "knn"] {
        assert!(d.join(format!("r/predictions-{name}.csv")).exists(), "{name}");
    }
    let m = json(&d.join("r/metrics.json"));
    assert!(m["classifiers"]["knn"]["auc"].is_number());
    assert!(m["knn"]["k"].is_number());
    let calls = json(&d.join("r/classify-manifest.json"))["counters"]["knn_match_calls"].as_u64().unwrap();
    // leave-one-out table (one pair per unordered training pair, both ways) plus test x train
    assert_eq!(calls, 10 * 9 + 2 * 10 * 10);
}

#[test]
fn knn_baseline_without_graphs_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    separable_embeddings(&d.join("train.csv"), 1);
    let out = ragkit(d, &["classify", "--train-emb", "train.csv", "--test-emb", "train.csv", "--baselines", "knn"]);
    assert_eq!(out.status.code(), Some(1));
}

fn write_predictions(path: &Path, rows: &[(&str, &str, f64)]) {
    let mut text = String::from("graph_id,true_label,pred_label,score\n");
    for (i, (t, p, s)) in rows.iter().enumerate() {
        text.push_str(&format!("g{i},{t},{p},{s}\n"));
    }
    std::fs::write(path, text).unwrap();
}

fn roc_points(path: &Path) -> Vec<(f64, f64)> {
    read(path)
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (f[1], f[2])
        })
        .collect()
}

#[test]
fn roc_of_perfect_scores() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_predictions(
        &d.join("p.csv"),
        &[("pos", "pos", 2.0), ("neg", "neg", 2.0), ("pos", "pos", 2.0), ("neg", "neg", 2.0)],
    );
    let out = ok(d, &["roc", "--predictions", "p.csv", "--positive", "pos", "--out", "roc.csv"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "auc 1");
    assert_eq!(roc_points(&d.join("roc.csv")), vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
    assert_eq!(json(&d.join("roc.auc.json"))["auc"], 1.0);
}

#[test]
fn roc_of_two_items() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_predictions(&d.join("p.csv"), &[("b", "b", 0.3), ("a", "b", 0.1)]);
    ok(d, &["roc", "--predictions", "p.csv", "--out", "roc.csv"]);
    assert_eq!(json(&d.join("roc.auc.json"))["auc"], 1.0);
    assert_eq!(json(&d.join("roc.auc.json"))["positive"], "b");
}

#[test]
fn roc_of_random_scores_is_near_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut r = ChaCha8Rng::seed_from_u64(77);
    let rows: Vec<(&str, &str, f64)> = (0..1000)
        .map(|i| {
            let truth = if i % 2 == 0 { "x" } else { "y" };
            let pred = if r.random_bool(0.5) { "x" } else { "y" };
            (truth, pred, r.random_range(0.0..1.0))
        })
        .collect();
    write_predictions(&d.join("p.csv"), &rows);
    ok(d, &["roc", "--predictions", "p.csv", "--out", "roc.csv"]);
    let auc = json(&d.join("roc.auc.json"))["auc"].as_f64().unwrap();
    // standard error of the Mann-Whitney statistic at 500/500 is about 0.013
    assert!((auc - 0.5).abs() <= 0.05, "auc {auc}");
    let pts = roc_points(&d.join("roc.csv"));
    assert_eq!(pts.first(), Some(&(0.0, 0.0)));
    assert_eq!(pts.last(), Some(&(1.0, 1.0)));
}

#[test]
fn roc_of_single_class_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_predictions(&d.join("p.csv"), &[("a", "a", 1.0), ("a", "a", 2.0)]);
    let out = ragkit(d, &["roc", "--predictions", "p.csv", "--out", "roc.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("roc.csv").exists());
}

#[test]
fn match_emits_the_morphism_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "2");
    let out = ok(
        d,
        &["match", "train.jsonl", "--source", "train-c0-0000", "--target", "train-c0-0000", "--schedule", "beta_final=12", "--out", "m.json"],
    );
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let map = v["node_map"].as_array().unwrap();
    for (i, t) in map.iter().enumerate() {
        assert_eq!(t.as_u64(), Some(i as u64));
    }
    assert_eq!(read(&d.join("m.json")), String::from_utf8(out.stdout).unwrap());
    assert_eq!(json(&d.join("m.manifest.json"))["config"]["schedule"]["beta_final"], 12.0);

    let bad = ragkit(d, &["match", "train.jsonl", "--source", "nope", "--target", "train-c0-0000"]);
    assert_eq!(bad.status.code(), Some(2));
    let bad = ragkit(d, &["match", "train.jsonl", "--source", "train-c0-0000", "--target", "x", "--schedule", "beta_rate=0.5"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn exit_codes_for_usage_and_help() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(ragkit(d, &["--help"]).status.code(), Some(0));
    assert_eq!(ragkit(d, &["--version"]).status.code(), Some(0));
    assert_eq!(ragkit(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(ragkit(d, &["synth", "--out", "a", "--out-test", "b", "--set", "model.nope=1"]).status.code(), Some(1));
    assert_eq!(ragkit(d, &["fit", "--train", "missing.jsonl"]).status.code(), Some(2));
    let threads = Command::new(env!("CARGO_BIN_EXE_ragkit"))
        .args(["synth", "--out", "a", "--out-test", "b"])
        .current_dir(d)
        .env("RAGKIT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(1));
}

#[test]
fn config_file_and_flags_compose() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.json"), r#"{"seed": 11, "synth": {"per_class": 2, "level": 0.2}}"#).unwrap();
    ok(
        d,
        &["synth", "--config", "c.json", "--set", "synth.base_nodes=6", "--level", "0.1", "--out", "a.jsonl", "--out-test", "b.jsonl"],
    );
    let m = json(&d.join("a.manifest.json"));
    assert_eq!(m["config"]["seed"], 11);
    assert_eq!(m["config"]["synth"]["per_class"], 2);
    assert_eq!(m["config"]["synth"]["base_nodes"], 6);
    assert_eq!(m["config"]["synth"]["level"], 0.1);
}
