//! Soft-margin kernel SVM on likelihood embeddings, trained by sequential
//! minimal optimization with maximal-violating-pair working-set selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax, Prediction, PredictionSet};
use crate::embedding::LikelihoodEmbedding;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    /// `(x . y + 1)^degree`
    Polynomial { degree: u32 },
    /// `exp(-gamma |x - y|^2)`
    Gaussian { gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub kind: KernelKind,
    /// Box constraint.
    pub c: f64,
}

impl KernelSpec {
    pub fn polynomial(degree: u32, c: f64) -> Self {
        Self {
            kind: KernelKind::Polynomial { degree },
            c,
        }
    }

    pub fn gaussian(gamma: f64, c: f64) -> Self {
        Self {
            kind: KernelKind::Gaussian { gamma },
            c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!("C = {} must be positive", self.c)));
        }
        match self.kind {
            KernelKind::Polynomial { degree } if degree == 0 => {
                Err(Error::InvalidParameter("polynomial degree must be at least 1".into()))
            }
            KernelKind::Gaussian { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::InvalidParameter(format!("gamma = {gamma} must be positive")))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kind {
            KernelKind::Polynomial { degree } => {
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                (dot + 1.0).powi(degree as i32)
            }
            KernelKind::Gaussian { gamma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            KernelKind::Polynomial { degree } => write!(f, "poly(d={degree}, C={})", self.c),
            KernelKind::Gaussian { gamma } => write!(f, "gauss(gamma={gamma}, C={})", self.c),
        }
    }
}

/// Polynomial degrees {1, 2, 3} and Gaussian widths {0.01, 0.1, 1, 10},
/// each crossed with C in {0.1, 1, 10, 100}.
pub fn default_grid() -> Vec<KernelSpec> {
    let cs = [0.1, 1.0, 10.0, 100.0];
    let mut grid = Vec::new();
    for d in 1..=3 {
        grid.extend(cs.iter().map(|&c| KernelSpec::polynomial(d, c)));
    }
    for g in [0.01, 0.1, 1.0, 10.0] {
        grid.extend(cs.iter().map(|&c| KernelSpec::gaussian(g, c)));
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmOptions {
    /// Stop once the maximal KKT violation drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 10_000_000,
        }
    }
}

/// One binary machine: `f(x) = sum_i coef_i K(sv_i, x) - rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Machine {
    coef: Vec<f64>,
    support: Vec<Vec<f64>>,
    rho: f64,
}

impl Machine {
    fn decision(&self, kernel: &KernelSpec, x: &[f64]) -> f64 {
        self.coef
            .iter()
            .zip(&self.support)
            .map(|(a, s)| a * kernel.eval(s, x))
            .sum::<f64>()
            - self.rho
    }
}

const TAU: f64 = 1e-12;

/// Solves the binary dual `min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0` for a
/// precomputed kernel matrix. Returns `(alpha, rho)`.
fn smo(kmat: &[f64], y: &[f64], c: f64, opts: &SvmOptions) -> (Vec<f64>, f64) {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * kmat[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);
    for _ in 0..opts.max_iter {
        let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut gmax2) = (usize::MAX, f64::NEG_INFINITY);
        for t in 0..n {
            if up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
            if low(alpha[t], y[t]) && y[t] * grad[t] > gmax2 {
                gmax2 = y[t] * grad[t];
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax + gmax2 < opts.tol {
            break;
        }
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(i, t) * di + q(j, t) * dj;
        }
    }

    // offset: average over free vectors, else midpoint of the feasible range
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (ub + lb) / 2.0
    };
    (alpha, rho)
}

/// Trained classifier. Two categories share one machine (the first
/// category positive); more use one machine per category against the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub categories: Vec<String>,
    pub dim: usize,
    machines: Vec<Machine>,
}

fn labeled_points<'e>(
    embeddings: &'e [LikelihoodEmbedding],
    categories: &[String],
) -> Result<(Vec<&'e [f64]>, Vec<usize>)> {
    let mut xs = Vec::with_capacity(embeddings.len());
    let mut labels = Vec::with_capacity(embeddings.len());
    for e in embeddings {
        let label = e
            .label
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter(format!("training item `{}` has no label", e.graph_id)))?;
        let k = categories
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown label `{label}`")))?;
        xs.push(e.features.as_slice());
        labels.push(k);
    }
    Ok((xs, labels))
}

/// Trains on labeled embeddings; every category must be represented.
pub fn svm_train(
    embeddings: &[LikelihoodEmbedding],
    categories: &[String],
    kernel: KernelSpec,
    opts: &SvmOptions,
) -> Result<SvmModel> {
    kernel.validate()?;
    if categories.len() < 2 {
        return Err(Error::InvalidParameter("SVM needs at least two categories".into()));
    }
    let (xs, labels) = labeled_points(embeddings, categories)?;
    for (k, c) in categories.iter().enumerate() {
        if !labels.contains(&k) {
            return Err(Error::EmptyClass(c.clone()));
        }
    }
    let dim = xs[0].len();
    crate::embedding::check_width(embeddings, dim)?;
    let n = xs.len();
    let mut kmat = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(xs[i], xs[j]);
            kmat[i * n + j] = v;
            kmat[j * n + i] = v;
        }
    }
    let positives: Vec<usize> = if categories.len() == 2 {
        vec![0]
    } else {
        (0..categories.len()).collect()
    };
    let machines = positives
        .into_iter()
        .map(|pos| {
            let y: Vec<f64> = labels.iter().map(|&l| if l == pos { 1.0 } else { -1.0 }).collect();
            let (alpha, rho) = smo(&kmat, &y, kernel.c, opts);
            let mut coef = Vec::new();
            let mut support = Vec::new();
            for t in 0..n {
                if alpha[t] > 0.0 {
                    coef.push(alpha[t] * y[t]);
                    support.push(xs[t].to_vec());
                }
            }
            Machine { coef, support, rho }
        })
        .collect();
    Ok(SvmModel {
        kernel,
        categories: categories.to_vec(),
        dim,
        machines,
    })
}

impl SvmModel {
    /// One decision value per category; larger favours that category.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
                context: "SVM features",
            });
        }
        let raw: Vec<f64> = self.machines.iter().map(|m| m.decision(&self.kernel, x)).collect();
        Ok(if self.categories.len() == 2 {
            vec![raw[0], -raw[0]]
        } else {
            raw
        })
    }

    pub fn predict(&self, embeddings: &[LikelihoodEmbedding]) -> Result<PredictionSet> {
        let mut out = PredictionSet::new(self.categories.clone());
        for e in embeddings {
            let values = self.decision_values(&e.features)?;
            let best = argmax(&values);
            out.items.push(Prediction {
                graph_id: e.graph_id.clone(),
                true_label: e.label.clone(),
                pred: self.categories[best].clone(),
                score: values[best],
            });
        }
        Ok(out)
    }

    pub fn support_vector_count(&self) -> usize {
        self.machines.iter().map(|m| m.support.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelection {
    pub best: KernelSpec,
    pub best_index: usize,
    /// Mean cross-validation accuracy per grid entry.
    pub accuracies: Vec<f64>,
}

/// Stratified `folds`-fold cross-validation over `grid`: within each class
/// the i-th item (in input order) goes to fold `i mod folds`. Highest mean
/// accuracy wins, ties toward the earlier grid entry.
pub fn model_select(
    train: &[LikelihoodEmbedding],
    categories: &[String],
    grid: &[KernelSpec],
    folds: usize,
    opts: &SvmOptions,
) -> Result<ModelSelection> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("empty hyperparameter grid"));
    }
    if folds < 2 {
        return Err(Error::InvalidParameter("cross-validation needs at least two folds".into()));
    }
    for spec in grid {
        spec.validate()?;
    }
    let (_, labels) = labeled_points(train, categories)?;
    let mut seen = vec![0usize; categories.len()];
    let fold_of: Vec<usize> = labels
        .iter()
        .map(|&l| {
            let f = seen[l] % folds;
            seen[l] += 1;
            f
        })
        .collect();
    let smallest = seen.iter().copied().min().unwrap_or(0);
    if folds > smallest {
        return Err(Error::InvalidParameter(format!(
            "{folds} folds exceed the smallest class size {smallest}"
        )));
    }
    let splits: Vec<(Vec<LikelihoodEmbedding>, Vec<LikelihoodEmbedding>)> = (0..folds)
        .map(|f| {
            let (held, kept): (Vec<_>, Vec<_>) = train.iter().zip(&fold_of).partition(|(_, &g)| g == f);
            (
                kept.into_iter().map(|(e, _)| e.clone()).collect(),
                held.into_iter().map(|(e, _)| e.clone()).collect(),
            )
        })
        .collect();
    let accuracies = grid
        .par_iter()
        .map(|&spec| {
            let mut total = 0.0;
            for (fit_set, held) in &splits {
                let model = svm_train(fit_set, categories, spec, opts)?;
                total += model.predict(held)?.accuracy().unwrap_or(0.0);
            }
            Ok(total / folds as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let best_index = argmax(&accuracies);
    Ok(ModelSelection {
        best: grid[best_index],
        best_index,
        accuracies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_values() {
        let p = KernelSpec::polynomial(2, 1.0);
        assert_eq!(p.eval(&[1.0, 2.0], &[3.0, -1.0]), 4.0);
        let g = KernelSpec::gaussian(0.5, 1.0);
        assert!((g.eval(&[0.0, 0.0], &[1.0, 1.0]) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn invalid_specs() {
        assert!(KernelSpec::polynomial(0, 1.0).validate().is_err());
        assert!(KernelSpec::gaussian(0.0, 1.0).validate().is_err());
        assert!(KernelSpec::gaussian(1.0, -1.0).validate().is_err());
    }

    #[test]
    fn default_grid_has_28_entries() {
        assert_eq!(default_grid().len(), 28);
    }

    #[test]
    fn spec_serializes_flat() {
        let s = serde_json::to_string(&KernelSpec::gaussian(0.1, 10.0)).unwrap();
        assert_eq!(s, r#"{"kind":"gaussian","gamma":0.1,"c":10.0}"#);
        let back: KernelSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, KernelSpec::gaussian(0.1, 10.0));
    }

    #[test]
    fn two_point_problem_has_closed_form() {
        // x = +1 positive, x = -1 negative under K = xy + 1: the dual
        // 2a - 2a^2 peaks at a = 1/2, giving f(x) = x and rho = 0.
        let kmat = vec![2.0, 0.0, 0.0, 2.0];
        let y = vec![1.0, -1.0];
        let opts = SvmOptions { tol: 1e-12, ..Default::default() };
        let (alpha, rho) = smo(&kmat, &y, 100.0, &opts);
        assert!((alpha[0] - 0.5).abs() < 1e-12 && (alpha[1] - 0.5).abs() < 1e-12);
        assert!(rho.abs() < 1e-12);
    }
}
