//! ROC analysis and paired significance testing.

use serde::{Deserialize, Serialize};

use super::PredictionSet;
use crate::error::{Error, Result};

/// `(is_positive, score)` pairs for a two-class prediction set, with every
/// score oriented so that larger favours `positive`: a prediction of
/// `positive` keeps its confidence, any other prediction negates it.
pub fn oriented_scores(set: &PredictionSet, positive: &str) -> Result<Vec<(bool, f64)>> {
    if set.categories.len() != 2 {
        return Err(Error::InvalidParameter(format!(
            "ROC analysis needs exactly two categories, got {}",
            set.categories.len()
        )));
    }
    if !set.categories.iter().any(|c| c == positive) {
        return Err(Error::InvalidParameter(format!("unknown positive category `{positive}`")));
    }
    set.items
        .iter()
        .map(|p| {
            let truth = p
                .true_label
                .as_deref()
                .ok_or_else(|| Error::InvalidParameter(format!("`{}` has no true label", p.graph_id)))?;
            let s = if p.pred == positive { p.score } else { -p.score };
            Ok((truth == positive, s))
        })
        .collect()
}

fn split_counts(scored: &[(bool, f64)]) -> Result<(usize, usize)> {
    if scored.iter().any(|(_, s)| !s.is_finite()) {
        return Err(Error::Domain("non-finite score".into()));
    }
    let pos = scored.iter().filter(|(p, _)| *p).count();
    let neg = scored.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Domain("ROC analysis needs both classes present".into()));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve from the Mann-Whitney rank statistic, with
/// midranks for tied scores.
pub fn roc_auc(scored: &[(bool, f64)]) -> Result<f64> {
    let (pos, neg) = split_counts(scored)?;
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].1.total_cmp(&scored[b].1));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scored[order[j + 1]].1 == scored[order[i]].1 {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let midrank = (i + j + 2) as f64 / 2.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&k| scored[k].0).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve through every distinct score threshold, from (0, 0) to (1, 1).
/// The first point has threshold `+inf`.
pub fn roc_curve(scored: &[(bool, f64)]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = split_counts(scored)?;
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].1.total_cmp(&scored[a].1));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scored[order[i]].1;
        while i < order.len() && scored[order[i]].1 == threshold {
            if scored[order[i]].0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(points)
}

/// Two-sided exact McNemar p-value for discordant counts `b` and `c`:
/// `min(1, 2 P[X <= min(b, c)])` with `X ~ Binomial(b + c, 1/2)`.
pub fn mcnemar_exact(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let k = b.min(c);
    // log C(n, i) - n ln 2, accumulated incrementally
    let ln2n = n as f64 * std::f64::consts::LN_2;
    let mut ln_term = -ln2n;
    let mut terms = vec![ln_term];
    for i in 0..k {
        ln_term += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        terms.push(ln_term);
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail = max.exp() * terms.iter().map(|t| (t - max).exp()).sum::<f64>();
    (2.0 * tail).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    /// Items only the first classifier got right.
    pub only_a: u64,
    /// Items only the second classifier got right.
    pub only_b: u64,
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
}

/// Paired comparison of two prediction sets over the same graphs.
pub fn significance_test(a: &PredictionSet, b: &PredictionSet, alpha: f64) -> Result<Significance> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if a.items.len() != b.items.len() {
        return Err(Error::Domain(format!(
            "prediction sets cover {} and {} graphs",
            a.items.len(),
            b.items.len()
        )));
    }
    let (mut only_a, mut only_b) = (0u64, 0u64);
    for (x, y) in a.items.iter().zip(&b.items) {
        if x.graph_id != y.graph_id || x.true_label != y.true_label {
            return Err(Error::Domain(format!(
                "prediction sets disagree at `{}` / `{}`",
                x.graph_id, y.graph_id
            )));
        }
        let truth = x
            .true_label
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter(format!("`{}` has no true label", x.graph_id)))?;
        match (x.pred == truth, y.pred == truth) {
            (true, false) => only_a += 1,
            (false, true) => only_b += 1,
            _ => {}
        }
    }
    let p_value = mcnemar_exact(only_a, only_b);
    Ok(Significance {
        only_a,
        only_b,
        p_value,
        alpha,
        significant: p_value < alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        let s = [(true, 0.9), (true, 0.4), (false, 0.5), (false, 0.1)];
        assert!((roc_auc(&s).unwrap() - 0.75).abs() < 1e-15);
        let tied = [(true, 1.0), (false, 1.0), (true, 1.0)];
        assert_eq!(roc_auc(&tied).unwrap(), 0.5);
        let sep = [(true, 2.0), (false, 1.0), (true, 3.0)];
        assert_eq!(roc_auc(&sep).unwrap(), 1.0);
        assert!(roc_auc(&[(true, 1.0)]).is_err());
    }

    #[test]
    fn perfect_curve_hugs_the_corner() {
        let pts = roc_curve(&[(true, 1.0), (false, 0.0)]).unwrap();
        let xy: Vec<(f64, f64)> = pts.iter().map(|p| (p.fpr, p.tpr)).collect();
        assert_eq!(xy, vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
    }

    #[test]
    fn mcnemar_examples() {
        assert_eq!(mcnemar_exact(0, 0), 1.0);
        assert!((mcnemar_exact(10, 0) - 2.0 * 0.5f64.powi(10)).abs() < 1e-15);
        assert_eq!(mcnemar_exact(1, 1), 1.0);
        assert_eq!(mcnemar_exact(3, 7), mcnemar_exact(7, 3));
    }
}
