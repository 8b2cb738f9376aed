use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use ragkit::classify::{significance_test, PredictionSet, Significance};
use ragkit::embedding::LikelihoodEmbedding;
use serde::Serialize;

use super::{in_dir, note};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::io;
use crate::manifest::Manifest;
use crate::pipeline::{self, ClassifierMetrics, EmbeddingStats, KnnOutcome, LfOutcome};

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Raw training embeddings CSV.
    #[arg(long)]
    pub train_emb: PathBuf,
    /// Raw test embeddings CSV.
    #[arg(long)]
    pub test_emb: PathBuf,
    /// Comma-separated baselines to run as well: `ml`, `knn`.
    #[arg(long, value_delimiter = ',')]
    pub baselines: Vec<String>,
    /// Training graphs, needed by the kNN baseline.
    #[arg(long)]
    pub train_data: Option<PathBuf>,
    /// Test graphs, needed by the kNN baseline.
    #[arg(long)]
    pub test_data: Option<PathBuf>,
    /// Category order of the feature columns; defaults to the statistics
    /// sidecar of the training embeddings, else the sorted labels.
    #[arg(long, value_delimiter = ',')]
    pub categories: Vec<String>,
    /// Candidate k for kNN (several: chosen by leave-one-out).
    #[arg(long, value_delimiter = ',')]
    pub knn_k: Vec<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub categories: Vec<String>,
    pub positive_class: Option<String>,
    pub selection: ragkit::classify::ModelSelection,
    pub support_vectors: usize,
    pub classifiers: BTreeMap<String, ClassifierMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knn: Option<KnnOutcome>,
    pub significance: BTreeMap<String, Significance>,
}

/// Every classifier's predictions plus the metrics report.
pub struct Evaluation {
    pub lf: LfOutcome,
    pub ml: Option<PredictionSet>,
    pub knn: Option<KnnOutcome>,
    pub report: Report,
}

pub fn evaluate(
    cfg: &ExperimentConfig,
    train_raw: &[LikelihoodEmbedding],
    test_raw: &[LikelihoodEmbedding],
    categories: &[String],
    with_ml: bool,
    knn: Option<KnnOutcome>,
) -> CliResult<Evaluation> {
    let (lf, _) = pipeline::rag_lf(train_raw, test_raw, categories, &cfg.classifier)?;
    let ml = if with_ml {
        Some(pipeline::rag_ml(test_raw, categories)?)
    } else {
        None
    };
    let mut classifiers = BTreeMap::new();
    let mut significance = BTreeMap::new();
    classifiers.insert("rag_lf".to_string(), pipeline::metrics(&lf.predictions)?);
    if let Some(ml) = &ml {
        classifiers.insert("rag_ml".to_string(), pipeline::metrics(ml)?);
        significance.insert(
            "rag_lf_vs_rag_ml".to_string(),
            significance_test(&lf.predictions, ml, cfg.classifier.alpha)?,
        );
    }
    if let Some(knn) = &knn {
        classifiers.insert("knn".to_string(), pipeline::metrics(&knn.predictions)?);
        significance.insert(
            "rag_lf_vs_knn".to_string(),
            significance_test(&lf.predictions, &knn.predictions, cfg.classifier.alpha)?,
        );
    }
    let report = Report {
        categories: categories.to_vec(),
        positive_class: pipeline::positive_class(categories).map(str::to_string),
        selection: lf.selection.clone(),
        support_vectors: lf.model.support_vector_count(),
        classifiers,
        knn: knn.clone(),
        significance,
    };
    Ok(Evaluation { lf, ml, knn, report })
}

/// Writes predictions, the trained SVM and the metrics report into `dir`.
pub fn write_evaluation(manifest: &mut Manifest, dir: &Path, eval: &Evaluation) -> CliResult<()> {
    manifest.write("predictions:rag_lf", &in_dir(dir, "predictions-rag-lf.csv"), &io::predictions_csv(&eval.lf.predictions))?;
    if let Some(ml) = &eval.ml {
        manifest.write("predictions:rag_ml", &in_dir(dir, "predictions-rag-ml.csv"), &io::predictions_csv(ml))?;
    }
    if let Some(knn) = &eval.knn {
        manifest.write("predictions:knn", &in_dir(dir, "predictions-knn.csv"), &io::predictions_csv(&knn.predictions))?;
    }
    manifest.write("svm", &in_dir(dir, "svm-model.json"), &io::to_json_bytes(&eval.lf.model))?;
    manifest.write("metrics", &in_dir(dir, "metrics.json"), &io::to_json_bytes(&eval.report))
}

fn resolve_categories(a: &ClassifyArgs, manifest: &mut Manifest, train: &[LikelihoodEmbedding]) -> CliResult<Vec<String>> {
    if !a.categories.is_empty() {
        return Ok(a.categories.clone());
    }
    let sidecar = io::sibling(&a.train_emb, "stats.json");
    if sidecar.exists() {
        let bytes = manifest.read("stats", &sidecar)?;
        let stats: EmbeddingStats = io::parse_json(&sidecar, &bytes)?;
        return Ok(stats.categories);
    }
    let mut labels: Vec<String> = train.iter().filter_map(|e| e.label.clone()).collect();
    labels.sort();
    labels.dedup();
    Ok(labels)
}

pub fn run(mut cfg: ExperimentConfig, a: &ClassifyArgs) -> CliResult<()> {
    if !a.knn_k.is_empty() {
        cfg.classifier.knn_k = a.knn_k.clone();
    }
    if let Some(f) = a.folds {
        cfg.classifier.folds = f;
    }
    if let Some(alpha) = a.alpha {
        cfg.classifier.alpha = alpha;
    }
    cfg.validate()?;
    let mut with_ml = false;
    let mut with_knn = false;
    for b in &a.baselines {
        match b.trim() {
            "ml" => with_ml = true,
            "knn" => with_knn = true,
            "" => {}
            other => return Err(CliError::usage(format!("unknown baseline `{other}` (expected ml, knn)"))),
        }
    }
    let mut manifest = Manifest::new("classify", &cfg);
    let bytes = manifest.read("train_embeddings", &a.train_emb)?;
    let train_raw = io::parse_embeddings_csv(&a.train_emb, &bytes)?;
    let bytes = manifest.read("test_embeddings", &a.test_emb)?;
    let test_raw = io::parse_embeddings_csv(&a.test_emb, &bytes)?;
    let categories = resolve_categories(a, &mut manifest, &train_raw)?;

    let knn = if with_knn {
        let (Some(tp), Some(sp)) = (&a.train_data, &a.test_data) else {
            return Err(CliError::usage("the knn baseline needs --train-data and --test-data"));
        };
        let bytes = manifest.read("train_data", tp)?;
        let train = io::parse_dataset(tp, &bytes)?;
        let bytes = manifest.read("test_data", sp)?;
        let test = io::parse_dataset(sp, &bytes)?;
        let out = pipeline::knn(&train, &test, &cfg.classifier.knn_k, &cfg.schedule)?;
        manifest.count("knn_match_calls", out.match_calls);
        Some(out)
    } else {
        None
    };

    let eval = evaluate(&cfg, &train_raw, &test_raw, &categories, with_ml, knn)?;
    write_evaluation(&mut manifest, &cfg.out_dir, &eval)?;
    for (name, m) in &eval.report.classifiers {
        let acc = m.accuracy.map_or("n/a".to_string(), |x| format!("{x:.4}"));
        note!("{name}: accuracy {acc}");
    }
    manifest.result("accuracy", eval.report.classifiers.iter().map(|(k, m)| (k.clone(), m.accuracy)).collect::<BTreeMap<_, _>>());
    manifest.finish(&in_dir(&cfg.out_dir, "classify-manifest.json"))
}
