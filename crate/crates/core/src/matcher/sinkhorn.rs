//! Soft match matrices and alternating row/column normalization.

use crate::error::{Error, Result};

/// Target accuracy of the non-slack marginals.
pub const MARGINAL_TOL: f64 = 1e-7;
/// Upper bound on extra sweeps spent reaching [`MARGINAL_TOL`].
pub const MAX_SWEEPS: usize = 100_000;
/// Extra sweeps tried before projecting through the slack row and column.
const SLACK_SWEEPS: usize = 64;

/// Dense `(rows + s) x (cols + s)` matrix, `s = 1` when a slack row and a
/// slack column are present. The slack corner is never read or normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchMatrix {
    rows: usize,
    cols: usize,
    slack: bool,
    data: Vec<f64>,
}

impl MatchMatrix {
    pub fn filled(rows: usize, cols: usize, slack: bool, value: f64) -> Self {
        let s = usize::from(slack);
        Self {
            rows,
            cols,
            slack,
            data: vec![value; (rows + s) * (cols + s)],
        }
    }

    /// Builds from full rows, including the slack row/column if `slack`.
    pub fn from_rows(full: &[Vec<f64>], slack: bool) -> Result<Self> {
        let s = usize::from(slack);
        let height = full.len();
        let width = full.first().map_or(0, Vec::len);
        if height < s || width < s || full.iter().any(|r| r.len() != width) {
            return Err(Error::Domain("ragged or undersized match matrix".into()));
        }
        Ok(Self {
            rows: height - s,
            cols: width - s,
            slack,
            data: full.iter().flatten().copied().collect(),
        })
    }

    /// Non-slack row count.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Non-slack column count.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn has_slack(&self) -> bool {
        self.slack
    }

    fn width(&self) -> usize {
        self.cols + usize::from(self.slack)
    }

    fn height(&self) -> usize {
        self.rows + usize::from(self.slack)
    }

    /// Index of the slack column, if any.
    pub fn slack_col(&self) -> Option<usize> {
        self.slack.then_some(self.cols)
    }

    /// Index of the slack row, if any.
    pub fn slack_row(&self) -> Option<usize> {
        self.slack.then_some(self.rows)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width() + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        let w = self.width();
        self.data[r * w + c] = value;
    }

    pub(crate) fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn is_corner(&self, r: usize, c: usize) -> bool {
        self.slack && r == self.rows && c == self.cols
    }

    /// Sum of a non-slack row across all columns (slack column included).
    pub fn row_sum(&self, r: usize) -> f64 {
        let w = self.width();
        self.data[r * w..(r + 1) * w].iter().sum()
    }

    /// Sum of a non-slack column across all rows (slack row included).
    pub fn col_sum(&self, c: usize) -> f64 {
        let w = self.width();
        (0..self.height()).map(|r| self.data[r * w + c]).sum()
    }

    /// Full rows for display and serialization.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.width().max(1)).map(<[f64]>::to_vec).collect()
    }

    /// Runs at least `iters` sweeps of row normalization followed by column
    /// normalization, then keeps sweeping until every non-slack row and column
    /// sums to 1 within [`MARGINAL_TOL`] (capped at [`MAX_SWEEPS`]). Non-slack
    /// rows are normalized over every column and non-slack columns over every
    /// row; the slack row and column are only rescaled by the opposing step.
    pub fn sinkhorn(&mut self, iters: usize) -> Result<()> {
        for r in 0..self.height() {
            for c in 0..self.width() {
                if self.is_corner(r, c) {
                    continue;
                }
                let v = self.get(r, c);
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Domain(format!(
                        "match matrix entry ({r}, {c}) = {v} is not strictly positive"
                    )));
                }
            }
        }
        self.sinkhorn_unchecked(iters);
        self.settle();
        Ok(())
    }

    /// Largest deviation of a non-slack row sum from 1. Column sums are
    /// exactly 1 after a sweep, so this is the convergence measure.
    fn row_defect(&self) -> f64 {
        (0..self.rows).map(|r| (self.row_sum(r) - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Brings the non-slack marginals within tolerance. When the matrix
    /// drifts toward a perfect matching the slack scalings tend to zero and
    /// plain sweeps converge only sublinearly, so after a short run of extra
    /// sweeps the remaining defect is projected out through the slack row
    /// and column, which carry no constraint of their own.
    pub(crate) fn settle(&mut self) {
        let budget = if self.slack { SLACK_SWEEPS } else { MAX_SWEEPS };
        let mut sweeps = 0;
        while self.row_defect() > MARGINAL_TOL && sweeps < budget {
            self.sinkhorn_unchecked(8);
            sweeps += 8;
        }
        if self.slack && self.row_defect() > MARGINAL_TOL {
            self.project_through_slack();
        }
    }

    /// Assumes column sums are exactly 1 (true right after a sweep).
    /// Overfull rows are scaled down to 1 and the mass they release is
    /// returned to the affected columns through the slack row; underfull rows
    /// put their deficit in the slack column.
    fn project_through_slack(&mut self) {
        let w = self.width();
        let (n, m) = (self.rows, self.cols);
        for r in 0..n {
            let real: f64 = self.data[r * w..r * w + m].iter().sum();
            if real > 1.0 {
                let scale = real.recip();
                for c in 0..m {
                    let v = self.data[r * w + c];
                    let scaled = v * scale;
                    self.data[r * w + c] = scaled;
                    self.data[n * w + c] += v - scaled;
                }
                self.data[r * w + m] = 0.0;
            } else {
                self.data[r * w + m] = 1.0 - real;
            }
        }
    }

    pub(crate) fn sinkhorn_unchecked(&mut self, iters: usize) {
        let w = self.width();
        let (rows, cols) = (self.rows, self.cols);
        let mut col_scale = vec![0.0; cols];
        for _ in 0..iters {
            for row in self.data.chunks_exact_mut(w).take(rows) {
                let sum: f64 = row.iter().sum();
                if sum > 0.0 {
                    let inv = sum.recip();
                    row.iter_mut().for_each(|v| *v *= inv);
                }
            }
            col_scale.iter_mut().for_each(|v| *v = 0.0);
            for row in self.data.chunks_exact(w) {
                for (acc, v) in col_scale.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            for v in col_scale.iter_mut() {
                *v = if *v > 0.0 { v.recip() } else { 1.0 };
            }
            for row in self.data.chunks_exact_mut(w) {
                for (v, s) in row.iter_mut().zip(&col_scale) {
                    *v *= s;
                }
            }
        }
    }
}

/// Returns `m` after `iters` alternating normalization sweeps.
pub fn sinkhorn_normalize(mut m: MatchMatrix, iters: usize) -> Result<MatchMatrix> {
    m.sinkhorn(iters)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry_with_slack_lands_inside_unit_interval() {
        let m = MatchMatrix::from_rows(&[vec![3.0, 0.5], vec![0.25, 1.0]], true).unwrap();
        let m = sinkhorn_normalize(m, 30).unwrap();
        let v = m.get(0, 0);
        assert!(v > 0.0 && v < 1.0);
        assert!((m.row_sum(0) - 1.0).abs() < 1e-6);
        assert!((m.col_sum(0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn doubly_stochastic_input_is_a_fixed_point() {
        let rows = vec![
            vec![0.5, 0.25, 0.25],
            vec![0.25, 0.5, 0.25],
            vec![0.25, 0.25, 0.0],
        ];
        // the corner holds 0.0 and must be ignored
        let m = MatchMatrix::from_rows(&rows, true).unwrap();
        let out = sinkhorn_normalize(m.clone(), 50).unwrap();
        for (a, b) in out.data().iter().zip(m.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_square_matrix_converges_to_one_over_n() {
        for n in 1..=6 {
            let m = MatchMatrix::filled(n, n, false, 7.5);
            let out = sinkhorn_normalize(m, 30).unwrap();
            let expected = 1.0 / n as f64;
            assert!(out.data().iter().all(|v| (v - expected).abs() < 1e-15));
        }
    }

    #[test]
    fn non_positive_entry_is_a_domain_error() {
        let m = MatchMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]], false).unwrap();
        assert!(matches!(sinkhorn_normalize(m, 5), Err(Error::Domain(_))));
        let m = MatchMatrix::from_rows(&[vec![1.0, -2.0], vec![1.0, 1.0]], true).unwrap();
        assert!(matches!(sinkhorn_normalize(m, 5), Err(Error::Domain(_))));
    }
}
