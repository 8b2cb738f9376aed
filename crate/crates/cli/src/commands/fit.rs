use std::path::PathBuf;

use clap::Args;
use serde_json::json;

use super::{in_dir, model_file_name, note};
use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::io;
use crate::manifest::Manifest;
use crate::pipeline::fit_prototypes;

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Labeled training dataset (JSON Lines).
    #[arg(long)]
    pub train: PathBuf,
}

pub fn run(cfg: ExperimentConfig, a: &FitArgs) -> CliResult<()> {
    cfg.validate()?;
    let mut manifest = Manifest::new("fit", &cfg);
    let bytes = manifest.read("train", &a.train)?;
    let train = io::parse_dataset(&a.train, &bytes)?;
    let fitted = fit_prototypes(&train, &cfg.model, &cfg.schedule)?;
    let mut per_class = serde_json::Map::new();
    for f in &fitted {
        let category = f.model.category().to_string();
        let path = in_dir(&cfg.out_dir, &model_file_name(&category));
        manifest.write(&format!("model:{category}"), &path, format!("{}\n", f.model.to_json()).as_bytes())?;
        manifest.count(&format!("fit_match_calls.{category}"), f.match_calls);
        manifest.count(&format!("diagnostic_match_calls.{category}"), f.diagnostic_calls);
        per_class.insert(
            category.clone(),
            json!({
                "graphs": f.graphs,
                "match_calls": f.match_calls,
                "prototype_nodes": f.model.nodes().len(),
                "prototype_edges": f.model.edges().len(),
                "dataset_log_likelihood": f.diagnostic,
            }),
        );
        note!("{category}: {} graphs, {} match calls, ln L = {:.4}", f.graphs, f.match_calls, f.diagnostic);
    }
    manifest.result("classes", per_class);
    manifest.finish(&in_dir(&cfg.out_dir, "fit-manifest.json"))
}
