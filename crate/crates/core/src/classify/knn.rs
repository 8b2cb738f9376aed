//! k-nearest-neighbour classification directly in the graph domain.
//!
//! The distance between two graphs is the negated symmetric match score
//! under unit-bandwidth Gaussian-kernel compatibilities,
//! `d(a, b) = -(score(a -> b) + score(b -> a)) / 2`.

use rayon::prelude::*;

use super::{Prediction, PredictionSet};
use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, GraphDataset};
use crate::matcher::{GaussianKernelCompatibility, Matcher};

/// Symmetric graph distance; two match calls.
pub fn graph_distance(a: &AttributedGraph, b: &AttributedGraph, matcher: &Matcher) -> Result<f64> {
    let ab = matcher.run(a, &GaussianKernelCompatibility::unit(b))?.score;
    let ba = matcher.run(b, &GaussianKernelCompatibility::unit(a))?.score;
    Ok(-0.5 * (ab + ba))
}

/// Dense `queries x references` distance table.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Domain("ragged distance matrix".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Distances from every query to every reference: `2 |Q| |R|` match calls.
    pub fn between(queries: &[AttributedGraph], references: &[AttributedGraph], matcher: &Matcher) -> Result<Self> {
        let data = (0..queries.len() * references.len())
            .into_par_iter()
            .map(|k| {
                let (q, r) = (k / references.len(), k % references.len());
                graph_distance(&queries[q], &references[r], matcher)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rows: queries.len(),
            cols: references.len(),
            data,
        })
    }

    /// Pairwise distances within one set; each unordered pair is matched
    /// once in each direction and the diagonal is left at 0.
    pub fn within(graphs: &[AttributedGraph], matcher: &Matcher) -> Result<Self> {
        let n = graphs.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let values = pairs
            .par_iter()
            .map(|&(i, j)| graph_distance(&graphs[i], &graphs[j], matcher))
            .collect::<Result<Vec<_>>>()?;
        let mut data = vec![0.0; n * n];
        for (&(i, j), d) in pairs.iter().zip(values) {
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
        Ok(Self { rows: n, cols: n, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

/// Majority vote among the `k` nearest references (distance ties broken by
/// reference index, vote ties toward the smaller category index). Returns
/// the winning category and its vote share.
fn vote(distances: &[f64], labels: &[usize], categories: usize, k: usize, skip: Option<usize>) -> (usize, f64) {
    let mut order: Vec<usize> = (0..distances.len()).filter(|&j| Some(j) != skip).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    let mut votes = vec![0usize; categories];
    for &j in order.iter().take(k) {
        votes[labels[j]] += 1;
    }
    let mut best = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = c;
        }
    }
    (best, votes[best] as f64 / k as f64)
}

fn train_labels(train: &GraphDataset) -> Result<Vec<usize>> {
    train
        .label_indices()
        .into_iter()
        .zip(train.graphs())
        .map(|(l, g)| l.ok_or_else(|| Error::InvalidParameter(format!("training graph `{}` has no label", g.id()))))
        .collect()
}

fn check_k(k: usize, available: usize) -> Result<()> {
    if k == 0 || k > available {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must lie in 1..={available}"
        )));
    }
    Ok(())
}

/// Classifies `test` from precomputed `test x train` distances.
pub fn knn_from_distances(
    distances: &DistanceMatrix,
    train: &GraphDataset,
    test: &GraphDataset,
    k: usize,
) -> Result<PredictionSet> {
    if train.is_empty() {
        return Err(Error::EmptyInput("kNN training set is empty"));
    }
    if distances.rows() != test.len() || distances.cols() != train.len() {
        return Err(Error::Domain(format!(
            "distance table is {}x{}, expected {}x{}",
            distances.rows(),
            distances.cols(),
            test.len(),
            train.len()
        )));
    }
    check_k(k, train.len())?;
    let labels = train_labels(train)?;
    let categories = train.categories().to_vec();
    let items = test
        .graphs()
        .iter()
        .enumerate()
        .map(|(q, g)| {
            let (c, share) = vote(distances.row(q), &labels, categories.len(), k, None);
            Prediction {
                graph_id: g.id().to_string(),
                true_label: g.label().map(str::to_string),
                pred: categories[c].clone(),
                score: share,
            }
        })
        .collect();
    Ok(PredictionSet { categories, items })
}

/// Graph-domain kNN: `2 |test| |train|` match calls.
pub fn knn_graph_classify(train: &GraphDataset, test: &GraphDataset, k: usize, matcher: &Matcher) -> Result<PredictionSet> {
    if train.is_empty() {
        return Err(Error::EmptyInput("kNN training set is empty"));
    }
    check_k(k, train.len())?;
    let distances = DistanceMatrix::between(test.graphs(), train.graphs(), matcher)?;
    knn_from_distances(&distances, train, test, k)
}

/// Leave-one-out accuracy of every candidate `k` on the training set;
/// returns the best `k` (ties toward the earlier candidate) and all
/// accuracies.
pub fn select_k_loo(within: &DistanceMatrix, train: &GraphDataset, candidates: &[usize]) -> Result<(usize, Vec<f64>)> {
    let n = train.len();
    if n < 2 {
        return Err(Error::EmptyInput("leave-one-out needs at least two training graphs"));
    }
    if within.rows() != n || within.cols() != n {
        return Err(Error::Domain("distance table does not match the training set".into()));
    }
    if candidates.is_empty() {
        return Err(Error::EmptyInput("no candidate k"));
    }
    let labels = train_labels(train)?;
    let mut accuracies = Vec::with_capacity(candidates.len());
    for &k in candidates {
        check_k(k, n - 1)?;
        let hits = (0..n)
            .filter(|&i| vote(within.row(i), &labels, train.categories().len(), k, Some(i)).0 == labels[i])
            .count();
        accuracies.push(hits as f64 / n as f64);
    }
    let best = super::argmax(&accuracies);
    Ok((candidates[best], accuracies))
}
