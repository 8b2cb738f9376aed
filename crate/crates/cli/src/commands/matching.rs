use std::path::PathBuf;

use clap::Args;
use ragkit::matcher::{likelihood_compatibility, GaussianKernelCompatibility};
use ragkit::{Matcher, RandomGraphModel};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::io;
use crate::manifest::Manifest;

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Dataset holding the graphs (JSON Lines).
    pub graphs: PathBuf,
    /// Id of the graph to map.
    #[arg(long)]
    pub source: String,
    /// Id of the target graph (Gaussian-kernel compatibility).
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pub target: Option<String>,
    /// Prototype file to match against instead (likelihood compatibility).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Kernel bandwidth for graph-to-graph matching.
    #[arg(long, default_value_t = 1.0)]
    pub bandwidth: f64,
    /// Also write the result (and a manifest) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cfg: ExperimentConfig, a: &MatchArgs) -> CliResult<()> {
    cfg.schedule.validate()?;
    if !(a.bandwidth > 0.0 && a.bandwidth.is_finite()) {
        return Err(CliError::usage("--bandwidth must be positive"));
    }
    let mut manifest = Manifest::new("match", &cfg);
    let bytes = manifest.read("graphs", &a.graphs)?;
    let data = io::parse_dataset(&a.graphs, &bytes)?;
    let lookup = |id: &str| {
        data.get(id)
            .ok_or_else(|| CliError::data(&a.graphs, format!("no graph with id `{id}`")))
    };
    let source = lookup(&a.source)?;
    let matcher = Matcher::new(cfg.schedule.clone())?;
    let output = match (&a.target, &a.model) {
        (Some(tid), _) => {
            let target = lookup(tid)?;
            let compat = GaussianKernelCompatibility::new(target, a.bandwidth);
            let r = matcher.run(source, &compat)?;
            let pairs: Vec<_> = r
                .morphism
                .node_map
                .iter()
                .enumerate()
                .map(|(i, t)| json!([source.nodes()[i].id, t.map(|t| target.nodes()[t].id.clone())]))
                .collect();
            json!({
                "source": source.id(),
                "target": target.id(),
                "score": r.score,
                "node_map": r.morphism.node_map,
                "edge_map": r.morphism.edge_map,
                "node_pairs": pairs,
            })
        }
        (None, Some(path)) => {
            let bytes = manifest.read("model", path)?;
            let text = String::from_utf8(bytes).map_err(|_| CliError::data(path, "model file is not UTF-8"))?;
            let model = RandomGraphModel::from_json(&text).map_err(|e| CliError::data(path, e.to_string()))?;
            let compat = likelihood_compatibility(&model)?;
            let r = matcher.run(source, &compat)?;
            let ll = model.log_likelihood(source, &r.morphism)?;
            json!({
                "source": source.id(),
                "model": model.category(),
                "score": r.score,
                "log_likelihood": ll,
                "node_map": r.morphism.node_map,
                "edge_map": r.morphism.edge_map,
            })
        }
        (None, None) => unreachable!("clap requires --target or --model"),
    };
    let text = io::to_json_bytes(&output);
    print!("{}", String::from_utf8_lossy(&text));
    if let Some(out) = &a.out {
        manifest.write("morphism", out, &text)?;
        manifest.count("match_calls", matcher.calls());
        manifest.finish(&io::sibling(out, "manifest.json"))?;
    }
    Ok(())
}
