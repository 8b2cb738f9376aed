//! `eval-table1`: the synthetic sweep. For every distortion level it
//! generates a train/test pair, fits the class prototypes, embeds both
//! splits and compares the likelihood-embedding SVM with the
//! maximum-likelihood rule and graph-domain kNN.

use std::path::Path;
use std::time::Instant;

use clap::Args;
use ragkit::classify::{oriented_scores, roc_curve, PredictionSet};
use ragkit::embedding::Standardizer;
use ragkit::synth::make_dataset;
use serde::Serialize;

use super::classify::{evaluate, write_evaluation};
use super::{in_dir, model_file_name, note};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::io::{self, fmt_f64};
use crate::manifest::Manifest;
use crate::pipeline::{self, positive_class, EmbeddingStats};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Distortion levels (comma-separated).
    #[arg(long, value_delimiter = ',')]
    pub levels: Vec<f64>,
    /// Graphs per class in each split.
    #[arg(long)]
    pub per_class: Option<usize>,
}

/// One row of the results table.
#[derive(Debug, Clone, Serialize)]
pub struct LevelRow {
    pub level: f64,
    pub train_graphs: usize,
    pub test_graphs: usize,
    pub rag_lf: f64,
    pub rag_ml: f64,
    pub knn: f64,
    pub knn_k: usize,
    pub auc_rag_lf: Option<f64>,
    pub auc_rag_ml: Option<f64>,
    pub auc_knn: Option<f64>,
    pub p_rag_lf_vs_rag_ml: f64,
    pub p_rag_lf_vs_knn: f64,
    pub fit_match_calls: u64,
    pub embed_match_calls: u64,
    pub knn_match_calls: u64,
}

pub fn level_dir_name(level: f64) -> String {
    format!("level-{level:.2}")
}

fn write_roc(manifest: &mut Manifest, dir: &Path, name: &str, set: &PredictionSet) -> CliResult<()> {
    let Some(pos) = positive_class(&set.categories) else {
        return Ok(());
    };
    let scored = oriented_scores(set, pos)?;
    if scored.iter().all(|s| s.0) || scored.iter().all(|s| !s.0) {
        return Ok(());
    }
    let points = roc_curve(&scored)?;
    manifest.write(&format!("roc:{name}"), &in_dir(dir, &format!("roc-{name}.csv")), &io::roc_csv(&points))
}

fn run_level(cfg: &ExperimentConfig, level: f64, manifest: &mut Manifest) -> CliResult<LevelRow> {
    let dir = in_dir(&cfg.out_dir, &level_dir_name(level));
    let started = Instant::now();
    let spec = cfg.synth.spec(cfg.seed, level);
    let (train, test) = make_dataset(&spec, cfg.synth.per_class)?;
    manifest.write("train", &in_dir(&dir, "train.jsonl"), train.to_jsonl_string().as_bytes())?;
    manifest.write("test", &in_dir(&dir, "test.jsonl"), test.to_jsonl_string().as_bytes())?;
    let categories = train.categories().to_vec();

    let fitted = pipeline::fit_prototypes(&train, &cfg.model, &cfg.schedule)?;
    let mut fit_calls = 0;
    for f in &fitted {
        let c = f.model.category();
        let path = in_dir(&dir, &model_file_name(c));
        manifest.write(&format!("model:{c}"), &path, format!("{}\n", f.model.to_json()).as_bytes())?;
        manifest.count(&format!("level {level:.2}/fit_match_calls.{c}"), f.match_calls);
        manifest.count(&format!("level {level:.2}/graphs.{c}"), f.graphs as u64);
        fit_calls += f.match_calls;
    }
    let models: Vec<_> = fitted.into_iter().map(|f| f.model).collect();
    note!("level {level:.2}: prototypes fitted ({fit_calls} match calls, {:.1?})", started.elapsed());

    let (train_raw, train_calls) = pipeline::embed(&models, &train, &cfg.schedule)?;
    let (test_raw, test_calls) = pipeline::embed(&models, &test, &cfg.schedule)?;
    let embed_calls = train_calls + test_calls;
    manifest.count(&format!("level {level:.2}/embed_match_calls"), embed_calls);
    let stats = EmbeddingStats {
        categories: categories.clone(),
        standardizer: Standardizer::fit(&train_raw)?,
    };
    let k = models.len();
    manifest.write("embeddings", &in_dir(&dir, "emb-train.csv"), &io::embeddings_csv(&train_raw, k))?;
    manifest.write("embeddings", &in_dir(&dir, "emb-test.csv"), &io::embeddings_csv(&test_raw, k))?;
    manifest.write(
        "embeddings",
        &in_dir(&dir, "emb-train.std.csv"),
        &io::embeddings_csv(&stats.standardizer.transform(&train_raw)?, k),
    )?;
    manifest.write(
        "embeddings",
        &in_dir(&dir, "emb-test.std.csv"),
        &io::embeddings_csv(&stats.standardizer.transform(&test_raw)?, k),
    )?;
    manifest.write("stats", &in_dir(&dir, "emb-train.stats.json"), &io::to_json_bytes(&stats))?;
    note!("level {level:.2}: embedded ({embed_calls} match calls, {:.1?})", started.elapsed());

    let knn = pipeline::knn(&train, &test, &cfg.classifier.knn_k, &cfg.schedule)?;
    manifest.count(&format!("level {level:.2}/knn_match_calls"), knn.match_calls);
    note!("level {level:.2}: kNN done, k = {} ({} match calls, {:.1?})", knn.k, knn.match_calls, started.elapsed());

    let eval = evaluate(cfg, &train_raw, &test_raw, &categories, true, Some(knn))?;
    write_evaluation(manifest, &dir, &eval)?;
    let ml = eval.ml.as_ref().expect("requested");
    let knn = eval.knn.as_ref().expect("requested");
    write_roc(manifest, &dir, "rag-lf", &eval.lf.predictions)?;
    write_roc(manifest, &dir, "rag-ml", ml)?;
    write_roc(manifest, &dir, "knn", &knn.predictions)?;

    let r = &eval.report;
    let acc = |name: &str| r.classifiers[name].accuracy.unwrap_or(f64::NAN);
    let auc = |name: &str| r.classifiers[name].auc;
    let row = LevelRow {
        level,
        train_graphs: train.len(),
        test_graphs: test.len(),
        rag_lf: acc("rag_lf"),
        rag_ml: acc("rag_ml"),
        knn: acc("knn"),
        knn_k: knn.k,
        auc_rag_lf: auc("rag_lf"),
        auc_rag_ml: auc("rag_ml"),
        auc_knn: auc("knn"),
        p_rag_lf_vs_rag_ml: r.significance["rag_lf_vs_rag_ml"].p_value,
        p_rag_lf_vs_knn: r.significance["rag_lf_vs_knn"].p_value,
        fit_match_calls: fit_calls,
        embed_match_calls: embed_calls,
        knn_match_calls: knn.match_calls,
    };
    note!(
        "level {level:.2}: RAG+LF {:.3}  RAG+ML {:.3}  kNN {:.3}  ({:.1?})",
        row.rag_lf,
        row.rag_ml,
        row.knn,
        started.elapsed()
    );
    Ok(row)
}

fn table_csv(rows: &[LevelRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "level", "rag_lf", "rag_ml", "knn", "knn_k", "auc_rag_lf", "auc_rag_ml", "auc_knn", "p_rag_lf_vs_rag_ml",
        "p_rag_lf_vs_knn",
    ])
    .expect("in-memory csv");
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    for r in rows {
        w.write_record([
            fmt_f64(r.level),
            fmt_f64(r.rag_lf),
            fmt_f64(r.rag_ml),
            fmt_f64(r.knn),
            r.knn_k.to_string(),
            opt(r.auc_rag_lf),
            opt(r.auc_rag_ml),
            opt(r.auc_knn),
            fmt_f64(r.p_rag_lf_vs_rag_ml),
            fmt_f64(r.p_rag_lf_vs_knn),
        ])
        .expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

pub fn run(mut cfg: ExperimentConfig, a: &EvalArgs) -> CliResult<()> {
    if !a.levels.is_empty() {
        cfg.eval.levels = a.levels.clone();
    }
    if let Some(n) = a.per_class {
        cfg.synth.per_class = n;
    }
    cfg.validate()?;
    let mut seen = std::collections::BTreeSet::new();
    if !cfg.eval.levels.iter().all(|l| seen.insert(level_dir_name(*l))) {
        return Err(CliError::usage("eval.levels must differ at two decimals"));
    }
    let mut manifest = Manifest::new("eval-table1", &cfg);
    let mut rows = Vec::with_capacity(cfg.eval.levels.len());
    for &level in &cfg.eval.levels {
        rows.push(run_level(&cfg, level, &mut manifest)?);
    }
    manifest.write("table", &in_dir(&cfg.out_dir, "table1.csv"), &table_csv(&rows))?;
    manifest.write("table", &in_dir(&cfg.out_dir, "table1.json"), &io::to_json_bytes(&rows))?;
    manifest.result("rows", &rows);
    println!("level   RAG+LF  RAG+ML  kNN     (k)");
    for r in &rows {
        println!("{:<7.2} {:<7.3} {:<7.3} {:<7.3} ({})", r.level, r.rag_lf, r.rag_ml, r.knn, r.knn_k);
    }
    manifest.finish(&in_dir(&cfg.out_dir, "manifest.json"))
}
