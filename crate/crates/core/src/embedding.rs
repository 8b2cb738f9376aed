//! Log-likelihood embedding: a graph becomes the vector of its best
//! log-likelihoods under each class prototype.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, GraphDataset};
use crate::matcher::{likelihood_compatibility, LikelihoodCompatibility, Matcher};
use crate::model::RandomGraphModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodEmbedding {
    pub graph_id: String,
    pub label: Option<String>,
    /// One log-likelihood per prototype, in category order.
    pub features: Vec<f64>,
}

/// Prototypes sharing one attribute space, with their compatibilities
/// prepared once.
struct Prepared<'m> {
    models: &'m [RandomGraphModel],
    compats: Vec<LikelihoodCompatibility<'m>>,
}

impl<'m> Prepared<'m> {
    fn new(models: &'m [RandomGraphModel]) -> Result<Self> {
        let first = models.first().ok_or(Error::EmptyInput("no prototype models"))?;
        for m in models {
            if m.node_dim() != first.node_dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.node_dim(),
                    found: m.node_dim(),
                    context: "prototype node attributes",
                });
            }
            if m.edge_dim() != first.edge_dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.edge_dim(),
                    found: m.edge_dim(),
                    context: "prototype edge attributes",
                });
            }
        }
        let compats = models.iter().map(likelihood_compatibility).collect::<Result<_>>()?;
        Ok(Self { models, compats })
    }

    fn embed(&self, graph: &AttributedGraph, matcher: &Matcher) -> Result<LikelihoodEmbedding> {
        graph.validate(self.models[0].node_dim(), self.models[0].edge_dim())?;
        let features = self
            .models
            .iter()
            .zip(&self.compats)
            .map(|(model, compat)| {
                let result = matcher.run(graph, compat)?;
                model.log_likelihood(graph, &result.morphism)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LikelihoodEmbedding {
            graph_id: graph.id().to_string(),
            label: graph.label().map(str::to_string),
            features,
        })
    }
}

/// Embeds one graph; issues exactly `models.len()` match calls.
pub fn embed(models: &[RandomGraphModel], graph: &AttributedGraph, matcher: &Matcher) -> Result<LikelihoodEmbedding> {
    Prepared::new(models)?.embed(graph, matcher)
}

/// Embeds every graph of `dataset` in dataset order, possibly in parallel;
/// issues exactly `|dataset| * models.len()` match calls.
pub fn embed_dataset(
    models: &[RandomGraphModel],
    dataset: &GraphDataset,
    matcher: &Matcher,
) -> Result<Vec<LikelihoodEmbedding>> {
    if dataset.is_empty() {
        return Ok(Vec::new());
    }
    let prepared = Prepared::new(models)?;
    check_dataset_dims(&models[0], dataset)?;
    dataset
        .graphs()
        .par_iter()
        .map(|g| prepared.embed(g, matcher))
        .collect()
}

fn check_dataset_dims(model: &RandomGraphModel, dataset: &GraphDataset) -> Result<()> {
    if dataset.node_dim() != model.node_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.node_dim(),
            found: dataset.node_dim(),
            context: "dataset node attributes",
        });
    }
    if dataset.edge_dim() != model.edge_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.edge_dim(),
            found: dataset.edge_dim(),
            context: "dataset edge attributes",
        });
    }
    Ok(())
}

/// Reorders `models` to follow `categories`; every category needs exactly
/// one model.
pub fn align_models(mut models: Vec<RandomGraphModel>, categories: &[String]) -> Result<Vec<RandomGraphModel>> {
    if models.len() != categories.len() {
        return Err(Error::InvalidParameter(format!(
            "{} models for {} categories",
            models.len(),
            categories.len()
        )));
    }
    let mut aligned = Vec::with_capacity(models.len());
    for c in categories {
        let pos = models
            .iter()
            .position(|m| m.category() == c)
            .ok_or_else(|| Error::InvalidParameter(format!("no model for category `{c}`")))?;
        aligned.push(models.swap_remove(pos));
    }
    Ok(aligned)
}

/// Per-coordinate affine standardization with statistics from one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation; constant coordinates store 1.
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(embeddings: &[LikelihoodEmbedding]) -> Result<Self> {
        let first = embeddings.first().ok_or(Error::EmptyInput("no embeddings to standardize"))?;
        let k = first.features.len();
        check_width(embeddings, k)?;
        let n = embeddings.len() as f64;
        let mean: Vec<f64> = (0..k)
            .map(|j| embeddings.iter().map(|e| e.features[j]).sum::<f64>() / n)
            .collect();
        let std = (0..k)
            .map(|j| {
                let var = embeddings.iter().map(|e| (e.features[j] - mean[j]).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: features.len(),
                context: "standardized features",
            });
        }
        Ok(features
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    pub fn transform(&self, embeddings: &[LikelihoodEmbedding]) -> Result<Vec<LikelihoodEmbedding>> {
        embeddings
            .iter()
            .map(|e| {
                Ok(LikelihoodEmbedding {
                    features: self.apply(&e.features)?,
                    ..e.clone()
                })
            })
            .collect()
    }
}

pub(crate) fn check_width(embeddings: &[LikelihoodEmbedding], k: usize) -> Result<()> {
    for e in embeddings {
        if e.features.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: e.features.len(),
                context: "embedding width",
            });
        }
    }
    Ok(())
}
