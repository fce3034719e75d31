use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::christoffel::ObservationSet;
use crate::error::{Error, Result};
use crate::linalg::{self, SymEigen};

/// Eigenvalues of the covariance below this fraction of the largest count
/// as zero.
const RANK_TOLERANCE: f64 = 1e-12;

/// PCA whitening `z = W (x − mean)` with `W = Λ^{-1/2} Qᵀ`.
///
/// Rows of `W` follow the covariance eigenvalues in ascending order and each
/// eigenvector is signed so that its largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteningTransform {
    pub matrix: DMatrix<f64>,
    pub mean: DVector<f64>,
}

impl WhiteningTransform {
    pub fn apply(&self, obs: &ObservationSet) -> Result<ObservationSet> {
        if obs.dim() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: obs.dim(),
            });
        }
        let mut centered = obs.matrix().clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        ObservationSet::new(&self.matrix * centered)
    }
}

/// Whitens `obs`, returning the transform and the whitened data.
pub fn whiten(obs: &ObservationSet) -> Result<(WhiteningTransform, ObservationSet)> {
    let n = obs.dim();
    let (mean, cov) = linalg::mean_and_covariance(obs.matrix());
    let mut eig = SymEigen::new(cov);
    eig.canonicalize_signs();
    let max = eig.max_value();
    let rank = eig
        .values
        .iter()
        .filter(|&&v| max > 0.0 && v > RANK_TOLERANCE * max)
        .count();
    if rank < n {
        return Err(Error::RankDeficient { rank, n });
    }
    let matrix = DMatrix::from_fn(n, n, |k, j| eig.vectors[(j, k)] / eig.values[k].sqrt());
    let transform = WhiteningTransform { matrix, mean };
    let white = transform.apply(obs)?;
    Ok((transform, white))
}
