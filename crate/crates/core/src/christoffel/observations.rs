use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Data matrix with one column per sample (`n` variables × `T` samples).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    data: DMatrix<f64>,
}

impl ObservationSet {
    /// Wraps an `n × T` matrix, rejecting empty or non-finite data.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::ZeroDimension);
        }
        if data.ncols() == 0 {
            return Err(Error::EmptyObservations);
        }
        for (col, column) in data.column_iter().enumerate() {
            if let Some(row) = column.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row, col });
            }
        }
        Ok(Self { data })
    }

    /// Builds the set from samples given as rows (`T × n` layout).
    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let n = samples
            .first()
            .map(Vec::len)
            .ok_or(Error::EmptyObservations)?;
        if let Some(bad) = samples.iter().find(|s| s.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        let data = DMatrix::from_fn(n, samples.len(), |i, t| samples[t][i]);
        Self::new(data)
    }

    /// Number of variables.
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn sample(&self, t: usize) -> &[f64] {
        let n = self.dim();
        &self.data.as_slice()[t * n..(t + 1) * n]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Returns `B·X`.
    pub fn transformed(&self, b: &DMatrix<f64>) -> Result<Self> {
        if b.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: b.ncols(),
            });
        }
        Self::new(b * &self.data)
    }

    /// Sub-set made of the given sample columns, in order.
    pub fn select(&self, columns: &[usize]) -> Result<Self> {
        Self::new(self.data.select_columns(columns))
    }
}

/// Empirical mean, covariance and extended covariance of a data set.
#[derive(Debug, Clone)]
pub struct FirstOrderStats {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    /// `(1/T) Σ_t [1; x_t][1, x_tᵀ]`.
    pub sigma_ext: DMatrix<f64>,
}

impl FirstOrderStats {
    pub fn from_observations(obs: &ObservationSet) -> Self {
        let (mu, sigma) = linalg::mean_and_covariance(obs.matrix());
        let n = obs.dim();
        let mut sigma_ext = DMatrix::zeros(n + 1, n + 1);
        sigma_ext[(0, 0)] = 1.0;
        for i in 0..n {
            sigma_ext[(0, i + 1)] = mu[i];
            sigma_ext[(i + 1, 0)] = mu[i];
            for j in 0..n {
                sigma_ext[(i + 1, j + 1)] = sigma[(i, j)] + mu[i] * mu[j];
            }
        }
        Self {
            mu,
            sigma,
            sigma_ext,
        }
    }

    /// `(x − μ)ᵀ Σ⁻¹ (x − μ)`, via Cholesky. `None` if `Σ` is not positive definite.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> Option<f64> {
        let chol = self.sigma.clone().cholesky()?;
        let diff = DVector::from_column_slice(x) - &self.mu;
        let sol = chol.solve(&diff);
        Some(diff.dot(&sol))
    }
}
