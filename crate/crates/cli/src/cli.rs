//! Argument parsing and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ragkit::EtaRule;

use crate::commands;
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "ragkit", version, about = "Random attributed graph prototypes for graph classification")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,

    #[command(subcommand)]
    pub command: Command,
}

/// Options accepted by every subcommand. Precedence: defaults, then
/// `--config`, then `--set`, then the explicit flags.
#[derive(Debug, Default, Args)]
pub struct Common {
    /// JSON experiment configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override any configuration field by dotted path, e.g. `model.sigma0_sq=2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Global random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// Anneal schedule overrides, e.g. `beta_final=20,sinkhorn_iters=50`.
    #[arg(long, global = true, value_name = "K=V,...")]
    pub schedule: Option<String>,
    #[arg(long, global = true)]
    pub beta_initial: Option<f64>,
    #[arg(long, global = true)]
    pub beta_rate: Option<f64>,
    #[arg(long, global = true)]
    pub beta_final: Option<f64>,
    #[arg(long, global = true)]
    pub sinkhorn_iters: Option<usize>,
    #[arg(long, global = true)]
    pub assignment_iters: Option<usize>,
    #[arg(long, global = true)]
    pub local_search_passes: Option<usize>,

    /// Initial covariance scale of new prototype elements.
    #[arg(long, global = true)]
    pub sigma0_sq: Option<f64>,
    /// Covariance eigenvalue floor.
    #[arg(long, global = true)]
    pub lambda_min: Option<f64>,
    #[arg(long, global = true)]
    pub epsilon_outlier: Option<f64>,
    #[arg(long, global = true)]
    pub p_min: Option<f64>,
    /// Learning-rate rule: `inverse-count` or a constant in (0, 1].
    #[arg(long, global = true, value_name = "RULE")]
    pub eta: Option<String>,
}

impl Common {
    pub fn resolve(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        for s in &self.set {
            cfg.set(s)?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        if let Some(spec) = &self.schedule {
            cfg.schedule = cfg.schedule.clone().with_overrides(spec)?;
        }
        let s = &mut cfg.schedule;
        set_opt(&mut s.beta_initial, self.beta_initial);
        set_opt(&mut s.beta_rate, self.beta_rate);
        set_opt(&mut s.beta_final, self.beta_final);
        set_opt(&mut s.sinkhorn_iters, self.sinkhorn_iters);
        set_opt(&mut s.assignment_iters_per_beta, self.assignment_iters);
        set_opt(&mut s.local_search_passes, self.local_search_passes);
        let m = &mut cfg.model;
        set_opt(&mut m.sigma0_sq, self.sigma0_sq);
        set_opt(&mut m.lambda_min, self.lambda_min);
        set_opt(&mut m.epsilon_outlier, self.epsilon_outlier);
        set_opt(&mut m.p_min, self.p_min);
        if let Some(rule) = &self.eta {
            m.eta = parse_eta(rule)?;
        }
        Ok(cfg)
    }
}

fn set_opt<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn parse_eta(rule: &str) -> CliResult<EtaRule> {
    match rule {
        "inverse-count" | "inverse_count" => Ok(EtaRule::InverseCount),
        other => other
            .parse()
            .map(|eta| EtaRule::Constant { eta })
            .map_err(|_| CliError::usage(format!("--eta expects `inverse-count` or a number, got `{other}`"))),
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a two-class synthetic train/test pair.
    Synth(commands::synth::SynthArgs),
    /// Fit one prototype per category of a training set.
    Fit(commands::fit::FitArgs),
    /// Embed a dataset into prototype log-likelihood space.
    Embed(commands::embed::EmbedArgs),
    /// Train on embeddings, predict the test split, report metrics.
    Classify(commands::classify::ClassifyArgs),
    /// ROC curve points and AUC of a two-class predictions file.
    Roc(commands::roc::RocArgs),
    /// Match one graph against another graph or a prototype.
    Match(commands::matching::MatchArgs),
    /// Full synthetic sweep over distortion levels.
    EvalTable1(commands::eval::EvalArgs),
}

pub fn dispatch(cli: Cli) -> CliResult<()> {
    let cfg = cli.common.resolve()?;
    match cli.command {
        Command::Synth(a) => commands::synth::run(cfg, &a),
        Command::Fit(a) => commands::fit::run(cfg, &a),
        Command::Embed(a) => commands::embed::run(cfg, &a),
        Command::Classify(a) => commands::classify::run(cfg, &a),
        Command::Roc(a) => commands::roc::run(cfg, &a),
        Command::Match(a) => commands::matching::run(cfg, &a),
        Command::EvalTable1(a) => commands::eval::run(cfg, &a),
    }
}
