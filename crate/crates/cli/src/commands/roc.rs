use std::path::PathBuf;

use clap::Args;
use ragkit::classify::{oriented_scores, roc_auc, roc_curve, PredictionSet};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::io;
use crate::manifest::Manifest;
use crate::pipeline::positive_class;

#[derive(Debug, Args)]
pub struct RocArgs {
    /// Predictions CSV (`graph_id,true_label,pred_label,score`).
    #[arg(long)]
    pub predictions: PathBuf,
    /// Positive category; defaults to the later of the two in sort order.
    #[arg(long)]
    pub positive: Option<String>,
    /// ROC points CSV; the AUC goes to `<stem>.auc.json`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cfg: ExperimentConfig, a: &RocArgs) -> CliResult<()> {
    let mut manifest = Manifest::new("roc", &cfg);
    let bytes = manifest.read("predictions", &a.predictions)?;
    let items = io::parse_predictions_csv(&a.predictions, &bytes)?;
    let mut categories: Vec<String> = items
        .iter()
        .flat_map(|p| p.true_label.iter().chain(std::iter::once(&p.pred)))
        .cloned()
        .collect();
    categories.sort();
    categories.dedup();
    if categories.len() != 2 {
        return Err(CliError::data(
            &a.predictions,
            format!("ROC analysis needs exactly two categories, found {}", categories.len()),
        ));
    }
    let positive = match &a.positive {
        Some(p) => p.clone(),
        None => positive_class(&categories).expect("two categories").to_string(),
    };
    let set = PredictionSet { categories, items };
    let scored = oriented_scores(&set, &positive)?;
    if !(scored.iter().any(|s| s.0) && scored.iter().any(|s| !s.0)) {
        return Err(CliError::data(&a.predictions, "ROC analysis needs both classes among the true labels"));
    }
    let points = roc_curve(&scored)?;
    let auc = roc_auc(&scored)?;
    manifest.write("roc", &a.out, &io::roc_csv(&points))?;
    let summary = json!({ "positive": positive, "auc": auc, "points": points.len() });
    manifest.write("auc", &io::sibling(&a.out, "auc.json"), &io::to_json_bytes(&summary))?;
    manifest.result("auc", auc);
    println!("auc {auc}");
    manifest.finish(&io::sibling(&a.out, "manifest.json"))
}
