//! Experiment configuration: a JSON file, dotted `key=value` overrides and
//! explicit flags, applied in that order.

use std::path::{Path, PathBuf};

use ragkit::classify::{default_grid, KernelSpec, SvmOptions};
use ragkit::synth::DistortionSpec;
use ragkit::{AnnealSchedule, ModelParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Single source of randomness for every command.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub synth: SynthConfig,
    pub schedule: AnnealSchedule,
    pub model: ModelParams,
    pub classifier: ClassifierConfig,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            out_dir: PathBuf::from("out"),
            synth: SynthConfig::default(),
            schedule: AnnealSchedule::default(),
            model: ModelParams::default(),
            classifier: ClassifierConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Generator settings; the seed comes from the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub level: f64,
    pub per_class: usize,
    pub base_nodes: usize,
    pub edge_density: f64,
    pub node_dim: usize,
    pub edge_dim: usize,
    pub attr_noise_sigma: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let d = DistortionSpec::default();
        Self {
            level: d.level,
            per_class: 50,
            base_nodes: d.base_nodes,
            edge_density: d.edge_density,
            node_dim: d.node_dim,
            edge_dim: d.edge_dim,
            attr_noise_sigma: d.attr_noise_sigma,
        }
    }
}

impl SynthConfig {
    pub fn spec(&self, seed: u64, level: f64) -> DistortionSpec {
        DistortionSpec {
            level,
            base_nodes: self.base_nodes,
            edge_density: self.edge_density,
            node_dim: self.node_dim,
            edge_dim: self.edge_dim,
            attr_noise_sigma: self.attr_noise_sigma,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    /// SVM hyperparameter grid searched by cross-validation.
    pub grid: Vec<KernelSpec>,
    pub folds: usize,
    pub svm: SvmOptions,
    /// Candidate `k` for graph kNN; more than one triggers leave-one-out
    /// selection on the training split.
    pub knn_k: Vec<usize>,
    /// Level of the McNemar test.
    pub alpha: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            folds: 5,
            svm: SvmOptions::default(),
            knn_k: vec![1, 3, 5, 7, 9],
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub levels: Vec<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            levels: vec![0.05, 0.10, 0.15, 0.20],
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    /// Applies one `dotted.key=value` override. The value is parsed as JSON
    /// and falls back to a plain string.
    pub fn set(&mut self, assignment: &str) -> CliResult<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("expected key=value, got `{assignment}`")))?;
        let value = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut tree = serde_json::to_value(&*self).expect("config serializes");
        let mut slot = &mut tree;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| CliError::usage(format!("unknown config key `{key}`")))?;
        }
        *slot = value;
        *self = serde_json::from_value(tree)
            .map_err(|e| CliError::usage(format!("bad value for `{key}`: {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        self.schedule.validate()?;
        self.model.validate()?;
        self.synth.spec(self.seed, self.synth.level).validate()?;
        for &level in &self.eval.levels {
            self.synth.spec(self.seed, level).validate()?;
        }
        for k in &self.classifier.grid {
            k.validate()?;
        }
        let bad = |m: &str| Err(CliError::usage(m.to_string()));
        if self.synth.per_class == 0 {
            return bad("synth.per_class must be at least 1");
        }
        if self.classifier.grid.is_empty() {
            return bad("classifier.grid is empty");
        }
        if self.classifier.folds < 2 {
            return bad("classifier.folds must be at least 2");
        }
        if self.classifier.knn_k.is_empty() || self.classifier.knn_k.contains(&0) {
            return bad("classifier.knn_k needs positive entries");
        }
        if !(self.classifier.alpha > 0.0 && self.classifier.alpha < 1.0) {
            return bad("classifier.alpha must lie in (0, 1)");
        }
        if !(self.classifier.svm.tol > 0.0) || self.classifier.svm.max_iter == 0 {
            return bad("classifier.svm needs positive tol and max_iter");
        }
        if self.eval.levels.is_empty() {
            return bad("eval.levels is empty");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_overrides_reach_nested_fields() {
        let mut c = ExperimentConfig::default();
        c.set("model.sigma0_sq=2.5").unwrap();
        c.set("schedule.beta_final=12").unwrap();
        c.set("out_dir=runs/a").unwrap();
        c.set("classifier.knn_k=[3]").unwrap();
        c.set("model.eta={\"kind\":\"constant\",\"eta\":0.1}").unwrap();
        assert_eq!(c.model.sigma0_sq, 2.5);
        assert_eq!(c.schedule.beta_final, 12.0);
        assert_eq!(c.out_dir, PathBuf::from("runs/a"));
        assert_eq!(c.classifier.knn_k, vec![3]);
        assert_eq!(c.model.eta, ragkit::EtaRule::Constant { eta: 0.1 });
    }

    #[test]
    fn unknown_keys_and_bad_values_are_usage_errors() {
        let mut c = ExperimentConfig::default();
        assert_eq!(c.set("model.sigma=1").unwrap_err().exit_code(), 1);
        assert_eq!(c.set("seed=abc").unwrap_err().exit_code(), 1);
        assert_eq!(c.set("seed").unwrap_err().exit_code(), 1);
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = ExperimentConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), c);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(partial.seed, 3);
        assert_eq!(partial.synth, SynthConfig::default());
    }
}
