//! Multivariate normal log-densities and covariance maintenance.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Symmetric positive-definite covariance, serialized as row-major lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariance(DMatrix<f64>);

impl Covariance {
    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        Self(DMatrix::identity(dim, dim) * scale)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Domain("covariance must be square".into()));
        }
        Ok(Self(DMatrix::from_fn(dim, dim, |i, j| rows[i][j])))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        SymmetricEigen::new(self.0.clone()).eigenvalues.iter().copied().collect()
    }

    /// `(1 - eta) * self + eta * d d^T`, then eigenvalue-floored.
    pub fn blend_outer(&self, d: &[f64], eta: f64, lambda_min: f64) -> Self {
        let dv = DVector::from_column_slice(d);
        let blended = &self.0 * (1.0 - eta) + (&dv * dv.transpose()) * eta;
        Self(floor_eigenvalues(blended, lambda_min))
    }
}

impl Serialize for Covariance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Covariance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Covariance::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Symmetrizes `m` and lifts every eigenvalue below `lambda_min` to it.
/// A matrix that is already symmetric with spectrum above the floor is
/// returned unchanged.
pub fn floor_eigenvalues(m: DMatrix<f64>, lambda_min: f64) -> DMatrix<f64> {
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&l| l >= lambda_min) {
        return sym;
    }
    let lifted = eig.eigenvalues.map(|l| l.max(lambda_min));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&lifted) * v.transpose();
    (&rebuilt + rebuilt.transpose()) * 0.5
}

/// Precomputed `ln N(x; mean, cov)`.
#[derive(Debug, Clone)]
pub struct GaussianLogDensity {
    mean: DVector<f64>,
    chol_l: DMatrix<f64>,
    norm: f64,
}

impl GaussianLogDensity {
    pub fn new(mean: &[f64], cov: &Covariance) -> Result<Self> {
        let dim = mean.len();
        if cov.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: cov.dim(),
                context: "covariance",
            });
        }
        let chol = nalgebra::Cholesky::new(cov.0.clone())
            .ok_or_else(|| Error::Domain("covariance is not positive definite".into()))?;
        let chol_l = chol.l();
        let log_det: f64 = 2.0 * chol_l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self {
            mean: DVector::from_column_slice(mean),
            chol_l,
            norm: -0.5 * (dim as f64 * (2.0 * PI).ln() + log_det),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Squared Mahalanobis distance of `x` from the mean.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_column_slice(x) - &self.mean;
        let y = self
            .chol_l
            .solve_lower_triangular(&diff)
            .expect("cholesky factor has a positive diagonal");
        y.norm_squared()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.norm - 0.5 * self.mahalanobis_sq(x)
    }
}
