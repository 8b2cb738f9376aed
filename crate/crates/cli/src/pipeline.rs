//! Pipeline stages shared by the individual commands and `eval-table1`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use ragkit::classify::{
    knn_from_distances, model_select, oriented_scores, rag_ml_from_embeddings, roc_auc, select_k_loo, svm_train,
    DistanceMatrix, ModelSelection, PredictionSet, SvmModel,
};
use ragkit::embedding::{embed_dataset, LikelihoodEmbedding, Standardizer};
use ragkit::model::{dataset_log_likelihood, fit};
use ragkit::{AnnealSchedule, GraphDataset, Matcher, ModelParams, RandomGraphModel};
use serde::{Deserialize, Serialize};

use crate::config::ClassifierConfig;
use crate::error::CliResult;

pub struct FittedClass {
    pub model: RandomGraphModel,
    pub graphs: usize,
    pub match_calls: u64,
    /// Dataset log-likelihood of the class under its own prototype.
    pub diagnostic: f64,
    pub diagnostic_calls: u64,
}

/// One prototype per dataset category, in category order.
pub fn fit_prototypes(
    train: &GraphDataset,
    params: &ModelParams,
    schedule: &AnnealSchedule,
) -> CliResult<Vec<FittedClass>> {
    train
        .categories()
        .par_iter()
        .map(|category| {
            let graphs = train.class_slice(category);
            let matcher = Matcher::new(schedule.clone())?;
            let report = fit(category.clone(), train.node_dim(), train.edge_dim(), &graphs, params, &matcher)?;
            let diag_matcher = Matcher::new(schedule.clone())?;
            let diagnostic = dataset_log_likelihood(&report.model, &graphs, &diag_matcher)?;
            Ok(FittedClass {
                model: report.model,
                graphs: graphs.len(),
                match_calls: report.match_calls,
                diagnostic,
                diagnostic_calls: diag_matcher.calls(),
            })
        })
        .collect()
}

pub fn embed(models: &[RandomGraphModel], data: &GraphDataset, schedule: &AnnealSchedule) -> CliResult<(Vec<LikelihoodEmbedding>, u64)> {
    let matcher = Matcher::new(schedule.clone())?;
    let out = embed_dataset(models, data, &matcher)?;
    Ok((out, matcher.calls()))
}

/// Standardization statistics together with the category order of the
/// feature columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingStats {
    pub categories: Vec<String>,
    #[serde(flatten)]
    pub standardizer: Standardizer,
}

pub struct LfOutcome {
    pub selection: ModelSelection,
    pub model: SvmModel,
    pub predictions: PredictionSet,
}

/// Likelihood-embedding classifier: standardize with training statistics,
/// select a kernel by cross-validation, train the winner and predict.
pub fn rag_lf(
    train_raw: &[LikelihoodEmbedding],
    test_raw: &[LikelihoodEmbedding],
    categories: &[String],
    cfg: &ClassifierConfig,
) -> CliResult<(LfOutcome, Standardizer)> {
    let standardizer = Standardizer::fit(train_raw)?;
    let train = standardizer.transform(train_raw)?;
    let test = standardizer.transform(test_raw)?;
    let selection = model_select(&train, categories, &cfg.grid, cfg.folds, &cfg.svm)?;
    let model = svm_train(&train, categories, selection.best, &cfg.svm)?;
    let predictions = model.predict(&test)?;
    Ok((
        LfOutcome {
            selection,
            model,
            predictions,
        },
        standardizer,
    ))
}

pub fn rag_ml(test_raw: &[LikelihoodEmbedding], categories: &[String]) -> CliResult<PredictionSet> {
    Ok(rag_ml_from_embeddings(test_raw, categories)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct KnnOutcome {
    pub k: usize,
    /// Leave-one-out training accuracy per candidate, when several were given.
    pub loo_accuracies: Option<BTreeMap<usize, f64>>,
    #[serde(skip)]
    pub predictions: PredictionSet,
    pub match_calls: u64,
}

/// Graph-domain kNN; with several candidates `k` is chosen by
/// leave-one-out accuracy on the training split.
pub fn knn(train: &GraphDataset, test: &GraphDataset, candidates: &[usize], schedule: &AnnealSchedule) -> CliResult<KnnOutcome> {
    let matcher = Matcher::new(schedule.clone())?;
    let (k, loo_accuracies) = if candidates.len() == 1 {
        (candidates[0], None)
    } else {
        let usable: Vec<usize> = candidates.iter().copied().filter(|&k| k < train.len()).collect();
        let within = DistanceMatrix::within(train.graphs(), &matcher)?;
        let (k, accs) = select_k_loo(&within, train, &usable)?;
        (k, Some(usable.into_iter().zip(accs).collect()))
    };
    let between = DistanceMatrix::between(test.graphs(), train.graphs(), &matcher)?;
    let predictions = knn_from_distances(&between, train, test, k)?;
    Ok(KnnOutcome {
        k,
        loo_accuracies,
        predictions,
        match_calls: matcher.calls(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifierMetrics {
    pub accuracy: Option<f64>,
    pub per_class_accuracy: BTreeMap<String, Option<f64>>,
    /// Two-class problems only; the last category is the positive class.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    /// Rows are true categories, columns predicted ones, in category order.
    pub confusion: Vec<Vec<usize>>,
}

/// Positive class of every two-class ROC analysis.
pub fn positive_class(categories: &[String]) -> Option<&str> {
    (categories.len() == 2).then(|| categories[1].as_str())
}

pub fn metrics(set: &PredictionSet) -> CliResult<ClassifierMetrics> {
    let auc = match positive_class(&set.categories) {
        Some(pos) if !set.is_empty() => {
            let scored = oriented_scores(set, pos)?;
            let has_both = scored.iter().any(|s| s.0) && scored.iter().any(|s| !s.0);
            if has_both {
                Some(roc_auc(&scored)?)
            } else {
                None
            }
        }
        _ => None,
    };
    Ok(ClassifierMetrics {
        accuracy: set.accuracy(),
        per_class_accuracy: set.categories.iter().cloned().zip(set.per_class_accuracy()).collect(),
        auc,
        confusion: set.confusion(),
    })
}
