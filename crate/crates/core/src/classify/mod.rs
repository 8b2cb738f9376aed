//! Classifiers over graphs and their likelihood embeddings, plus the
//! evaluation metrics used to compare them.

mod knn;
mod metrics;
mod svm;

pub use knn::{graph_distance, knn_from_distances, knn_graph_classify, select_k_loo, DistanceMatrix};
pub use metrics::{mcnemar_exact, oriented_scores, roc_auc, roc_curve, significance_test, RocPoint, Significance};
pub use svm::{default_grid, model_select, svm_train, KernelKind, KernelSpec, ModelSelection, SvmModel, SvmOptions};

use serde::{Deserialize, Serialize};

use crate::embedding::{embed_dataset, LikelihoodEmbedding};
use crate::error::{Error, Result};
use crate::graph::GraphDataset;
use crate::matcher::Matcher;
use crate::model::RandomGraphModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub graph_id: String,
    pub true_label: Option<String>,
    pub pred: String,
    /// Confidence in `pred`; larger is more confident.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub categories: Vec<String>,
    pub items: Vec<Prediction>,
}

impl PredictionSet {
    pub fn new(categories: Vec<String>) -> Self {
        Self {
            categories,
            items: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn labeled(&self) -> impl Iterator<Item = (&str, &str)> {
        self.items
            .iter()
            .filter_map(|p| p.true_label.as_deref().map(|t| (t, p.pred.as_str())))
    }

    /// Fraction of labeled items predicted correctly; `None` without labels.
    pub fn accuracy(&self) -> Option<f64> {
        let (mut hit, mut total) = (0usize, 0usize);
        for (t, p) in self.labeled() {
            total += 1;
            hit += usize::from(t == p);
        }
        (total > 0).then(|| hit as f64 / total as f64)
    }

    /// Accuracy restricted to each true category, in category order.
    pub fn per_class_accuracy(&self) -> Vec<Option<f64>> {
        let confusion = self.confusion();
        confusion
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let total: usize = row.iter().sum();
                (total > 0).then(|| row[k] as f64 / total as f64)
            })
            .collect()
    }

    /// `confusion[true][pred]` counts over labeled items.
    pub fn confusion(&self) -> Vec<Vec<usize>> {
        let k = self.categories.len();
        let mut m = vec![vec![0; k]; k];
        let index = |c: &str| self.categories.iter().position(|x| x == c);
        for (t, p) in self.labeled() {
            if let (Some(i), Some(j)) = (index(t), index(p)) {
                m[i][j] += 1;
            }
        }
        m
    }
}

/// Index of the largest value; ties go to the smaller index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Maximum-likelihood rule on precomputed embeddings: the prototype with
/// the largest log-likelihood wins; the score is its margin over the
/// runner-up.
pub fn rag_ml_from_embeddings(embeddings: &[LikelihoodEmbedding], categories: &[String]) -> Result<PredictionSet> {
    if categories.len() < 2 {
        return Err(Error::InvalidParameter("maximum-likelihood rule needs at least two prototypes".into()));
    }
    crate::embedding::check_width(embeddings, categories.len())?;
    let mut out = PredictionSet::new(categories.to_vec());
    for e in embeddings {
        let best = argmax(&e.features);
        let runner_up = e
            .features
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != best)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        out.items.push(Prediction {
            graph_id: e.graph_id.clone(),
            true_label: e.label.clone(),
            pred: categories[best].clone(),
            score: e.features[best] - runner_up,
        });
    }
    Ok(out)
}

/// Embeds `dataset` under `models` (category order) and applies the
/// maximum-likelihood rule.
pub fn rag_ml_classify(models: &[RandomGraphModel], dataset: &GraphDataset, matcher: &Matcher) -> Result<PredictionSet> {
    let categories: Vec<String> = models.iter().map(|m| m.category().to_string()).collect();
    if categories.len() < 2 {
        return Err(Error::InvalidParameter("maximum-likelihood rule needs at least two prototypes".into()));
    }
    let embeddings = embed_dataset(models, dataset, matcher)?;
    rag_ml_from_embeddings(&embeddings, &categories)
}
