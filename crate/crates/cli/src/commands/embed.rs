use std::path::PathBuf;

use clap::Args;
use ragkit::embedding::{align_models, Standardizer};
use ragkit::RandomGraphModel;

use super::note;
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::io;
use crate::manifest::Manifest;
use crate::pipeline::{embed, EmbeddingStats};

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Prototype files, one per dataset category (any order).
    #[arg(long, num_args = 1.., required = true)]
    pub models: Vec<PathBuf>,
    /// Dataset to embed (JSON Lines).
    #[arg(long)]
    pub data: PathBuf,
    /// Raw feature CSV; `<stem>.std.csv` and `<stem>.stats.json` are
    /// written beside it.
    #[arg(long)]
    pub out: PathBuf,
    /// Standardization statistics from the training split. Without it the
    /// statistics are fitted on this dataset.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

pub fn run(cfg: ExperimentConfig, a: &EmbedArgs) -> CliResult<()> {
    cfg.validate()?;
    let mut manifest = Manifest::new("embed", &cfg);
    let mut models = Vec::with_capacity(a.models.len());
    for path in &a.models {
        let bytes = manifest.read("model", path)?;
        let text = String::from_utf8(bytes).map_err(|_| CliError::data(path, "model file is not UTF-8"))?;
        models.push(RandomGraphModel::from_json(&text).map_err(|e| CliError::data(path, e.to_string()))?);
    }
    let bytes = manifest.read("data", &a.data)?;
    let data = io::parse_dataset(&a.data, &bytes)?;
    let categories = data.categories().to_vec();
    let models = align_models(models, &categories)?;
    let given_stats: Option<EmbeddingStats> = match &a.stats {
        Some(path) => {
            let bytes = manifest.read("stats", path)?;
            let stats: EmbeddingStats = io::parse_json(path, &bytes)?;
            if stats.categories != categories {
                return Err(CliError::data(path, "statistics were fitted for other categories"));
            }
            Some(stats)
        }
        None => None,
    };

    let (raw, calls) = embed(&models, &data, &cfg.schedule)?;
    let k = models.len();
    manifest.count("embed_match_calls", calls);
    manifest.result("graphs", data.len());
    manifest.result("prototypes", k);
    manifest.write("raw", &a.out, &io::embeddings_csv(&raw, k))?;

    let stats = match given_stats {
        Some(s) => Some(s),
        None if raw.is_empty() => None,
        None => Some(EmbeddingStats {
            categories: categories.clone(),
            standardizer: Standardizer::fit(&raw)?,
        }),
    };
    let std_path = io::sibling(&a.out, "std.csv");
    match &stats {
        Some(s) => {
            let standardized = s.standardizer.transform(&raw)?;
            manifest.write("standardized", &std_path, &io::embeddings_csv(&standardized, k))?;
            manifest.write("stats", &io::sibling(&a.out, "stats.json"), &io::to_json_bytes(s))?;
        }
        None => manifest.write("standardized", &std_path, &io::embeddings_csv(&[], k))?,
    }
    note!("embedded {} graphs under {k} prototypes ({calls} match calls)", data.len());
    manifest.finish(&io::sibling(&a.out, "manifest.json"))
}
