//! Evaluation of separation runs: ambiguity-resolved MSE, label accuracy
//! and trimmed Monte Carlo averages.

mod hungarian;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use hungarian::min_cost_assignment;

use crate::error::{Error, Result};

/// Fraction trimmed from each end of a Monte Carlo sample by default.
pub const DEFAULT_TRIM: f64 = 0.01;

/// Matching of estimated to true sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// `permutation[i]` is the estimated row matched to true source `i`.
    pub permutation: Vec<usize>,
    /// Least-squares factor mapping that estimated row onto source `i`.
    pub scales: Vec<f64>,
}

fn check_shapes(s_hat: &DMatrix<f64>, s_true: &DMatrix<f64>) -> Result<()> {
    if s_hat.nrows() != s_true.nrows() {
        return Err(Error::DimensionMismatch {
            expected: s_true.nrows(),
            got: s_hat.nrows(),
        });
    }
    if s_hat.ncols() != s_true.ncols() {
        return Err(Error::DimensionMismatch {
            expected: s_true.ncols(),
            got: s_hat.ncols(),
        });
    }
    Ok(())
}

fn centered_row(m: &DMatrix<f64>, i: usize) -> (Vec<f64>, f64) {
    let row = m.row(i);
    let mean = row.mean();
    let c: Vec<f64> = row.iter().map(|v| v - mean).collect();
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    (c, norm)
}

/// Resolves permutation, sign and scale: rows are paired to maximise the
/// summed absolute correlation, then each estimate is scaled by least squares.
pub fn align(s_hat: &DMatrix<f64>, s_true: &DMatrix<f64>) -> Result<Alignment> {
    check_shapes(s_hat, s_true)?;
    let n = s_true.nrows();
    let truth: Vec<_> = (0..n).map(|i| centered_row(s_true, i)).collect();
    if let Some(i) = truth.iter().position(|(_, norm)| *norm == 0.0) {
        return Err(Error::InvalidArgument(format!(
            "true source {i} has zero variance"
        )));
    }
    let est: Vec<_> = (0..n).map(|j| centered_row(s_hat, j)).collect();
    let cost = DMatrix::from_fn(n, n, |i, j| {
        let (ti, tn) = &truth[i];
        let (ej, en) = &est[j];
        if *en == 0.0 {
            return 0.0;
        }
        let dot: f64 = ti.iter().zip(ej).map(|(a, b)| a * b).sum();
        -(dot / (tn * en)).abs()
    });
    let permutation = min_cost_assignment(&cost);
    let scales = permutation
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let e = s_hat.row(j);
            let energy = e.norm_squared();
            if energy == 0.0 {
                1.0
            } else {
                e.dot(&s_true.row(i)) / energy
            }
        })
        .collect();
    Ok(Alignment {
        permutation,
        scales,
    })
}

/// `(1/(nT)) Σ_i Σ_t (scale_i·ŝ_{π(i),t} − s_{i,t})²`.
pub fn mse(s_hat: &DMatrix<f64>, s_true: &DMatrix<f64>, alignment: &Alignment) -> Result<f64> {
    check_shapes(s_hat, s_true)?;
    let (n, t) = s_true.shape();
    if alignment.permutation.len() != n || alignment.scales.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: alignment.permutation.len(),
        });
    }
    let mut total = 0.0;
    for i in 0..n {
        let j = alignment.permutation[i];
        let k = alignment.scales[i];
        total += s_hat
            .row(j)
            .iter()
            .zip(s_true.row(i).iter())
            .map(|(e, s)| (k * e - s).powi(2))
            .sum::<f64>();
    }
    Ok(total / (n * t) as f64)
}

/// Aligns and returns the MSE in one step.
pub fn aligned_mse(s_hat: &DMatrix<f64>, s_true: &DMatrix<f64>) -> Result<f64> {
    mse(s_hat, s_true, &align(s_hat, s_true)?)
}

/// Fraction of positions where the two label vectors agree.
pub fn upsilon(labels_hat: &[u8], labels_true: &[u8]) -> Result<f64> {
    if labels_hat.len() != labels_true.len() {
        return Err(Error::DimensionMismatch {
            expected: labels_true.len(),
            got: labels_hat.len(),
        });
    }
    if labels_hat.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let hits = labels_hat
        .iter()
        .zip(labels_true)
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / labels_hat.len() as f64)
}

/// Values dropped from each end: `⌊trim_frac·N⌋`.
pub fn trim_count(len: usize, trim_frac: f64) -> usize {
    // the epsilon keeps e.g. 0.01·100 from landing just below 1
    (trim_frac * len as f64 + 1e-9).floor() as usize
}

/// Mean after sorting and discarding `⌊trim_frac·N⌋` values at each end.
pub fn trimmed_mean(values: &[f64], trim_frac: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "trimmed mean of an empty list".into(),
        ));
    }
    if !(0.0..0.5).contains(&trim_frac) {
        return Err(Error::InvalidArgument(format!(
            "trim fraction must lie in [0, 0.5), got {trim_frac}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = trim_count(sorted.len(), trim_frac);
    let kept = &sorted[k..sorted.len() - k];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    Single,
    TrimmedMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub mse: f64,
    pub upsilon: f64,
    pub trials: usize,
    pub aggregate: Aggregate,
}

impl EvaluationReport {
    pub fn single(mse: f64, upsilon: f64) -> Self {
        Self {
            mse,
            upsilon,
            trials: 1,
            aggregate: Aggregate::Single,
        }
    }

    /// Trims each metric independently over the per-trial reports.
    pub fn trimmed(runs: &[EvaluationReport], trim_frac: f64) -> Result<Self> {
        let mses: Vec<f64> = runs.iter().map(|r| r.mse).collect();
        let ups: Vec<f64> = runs.iter().map(|r| r.upsilon).collect();
        Ok(Self {
            mse: trimmed_mean(&mses, trim_frac)?,
            upsilon: trimmed_mean(&ups, trim_frac)?,
            trials: runs.len(),
            aggregate: Aggregate::TrimmedMean,
        })
    }
}
