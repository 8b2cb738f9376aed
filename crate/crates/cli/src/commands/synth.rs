use std::path::PathBuf;

use clap::Args;
use ragkit::synth::make_dataset;

use crate::config::ExperimentConfig;
use crate::error::CliResult;
use crate::io;
use crate::manifest::Manifest;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Distortion level in [0, 1].
    #[arg(long)]
    pub level: Option<f64>,
    /// Graphs per class in each split.
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub base_nodes: Option<usize>,
    #[arg(long)]
    pub edge_density: Option<f64>,
    #[arg(long)]
    pub node_dim: Option<usize>,
    #[arg(long)]
    pub edge_dim: Option<usize>,
    #[arg(long)]
    pub attr_noise_sigma: Option<f64>,
    /// Training split (JSON Lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Test split (JSON Lines).
    #[arg(long)]
    pub out_test: PathBuf,
}

pub fn run(mut cfg: ExperimentConfig, a: &SynthArgs) -> CliResult<()> {
    let s = &mut cfg.synth;
    if let Some(v) = a.level {
        s.level = v;
    }
    if let Some(v) = a.per_class {
        s.per_class = v;
    }
    if let Some(v) = a.base_nodes {
        s.base_nodes = v;
    }
    if let Some(v) = a.edge_density {
        s.edge_density = v;
    }
    if let Some(v) = a.node_dim {
        s.node_dim = v;
    }
    if let Some(v) = a.edge_dim {
        s.edge_dim = v;
    }
    if let Some(v) = a.attr_noise_sigma {
        s.attr_noise_sigma = v;
    }
    cfg.validate()?;
    let spec = cfg.synth.spec(cfg.seed, cfg.synth.level);
    let (train, test) = make_dataset(&spec, cfg.synth.per_class)?;
    let mut manifest = Manifest::new("synth", &cfg);
    manifest.write("train", &a.out, train.to_jsonl_string().as_bytes())?;
    manifest.write("test", &a.out_test, test.to_jsonl_string().as_bytes())?;
    manifest.result("train_graphs", train.len());
    manifest.result("test_graphs", test.len());
    manifest.result("categories", train.categories());
    manifest.finish(&io::sibling(&a.out, "manifest.json"))?;
    super::note!("wrote {} train and {} test graphs", train.len(), test.len());
    Ok(())
}
