//! Whitening, fixed-point ICA and the classify-then-unmix pipeline.
//!
//! [`separate`] scores the samples, keeps those labelled 0, estimates the
//! unmixing matrix `B̂` on that subset only, and applies `B̂` to every
//! sample: `Ŝ = B̂·X`. Any [`IcaAlgorithm`] can be plugged in; the built-in
//! one is [`FixedPointIca`].

mod fixed_point;
mod whiten;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use fixed_point::{Contrast, FixedPointIca, IcaAlgorithm, RotationEstimate};
pub use whiten::{whiten, WhiteningTransform};

use crate::christoffel::{classify, ClassifierConfig, ObservationSet, ScoreReport};
use crate::error::{Error, Result};

/// Estimated inverse of the mixing matrix, `B̂ = R·W`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnmixingEstimate {
    pub b_hat: DMatrix<f64>,
    /// Orthogonal factor found in whitened coordinates.
    pub rotation: DMatrix<f64>,
    pub whitening: WhiteningTransform,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationResult {
    /// `B̂·X` over all samples, `n × T`.
    pub s_hat: DMatrix<f64>,
    pub unmixing: UnmixingEstimate,
    /// Present when labels came from the classifier.
    pub report: Option<ScoreReport>,
    /// Labels used to pick the ICA subset.
    pub labels: Vec<u8>,
    pub retained_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationConfig {
    pub classifier: ClassifierConfig,
    #[serde(default)]
    pub ica: FixedPointIca,
}

impl SeparationConfig {
    pub fn new(degree: usize, eta: f64) -> Self {
        Self {
            classifier: ClassifierConfig::new(degree, eta),
            ica: FixedPointIca::default(),
        }
    }
}

/// Smallest subset ICA is run on: `max(10·n, n+1)`.
pub fn min_retained(n: usize) -> usize {
    (10 * n).max(n + 1)
}

/// Runs `algorithm` on whitened data and composes the rotation with the
/// whitening matrix.
pub fn run_ica(
    white: &ObservationSet,
    whitening: &WhiteningTransform,
    algorithm: &dyn IcaAlgorithm,
    seed: u64,
) -> Result<UnmixingEstimate> {
    let est = algorithm.rotation(white, seed)?;
    Ok(UnmixingEstimate {
        b_hat: &est.rotation * &whitening.matrix,
        rotation: est.rotation,
        whitening: whitening.clone(),
        iterations: est.iterations,
        converged: est.converged,
    })
}

/// Whitens and unmixes the samples labelled 0.
pub fn unmix_subset(
    obs: &ObservationSet,
    labels: &[u8],
    algorithm: &dyn IcaAlgorithm,
    seed: u64,
) -> Result<UnmixingEstimate> {
    if labels.len() != obs.len() {
        return Err(Error::DimensionMismatch {
            expected: obs.len(),
            got: labels.len(),
        });
    }
    let keep: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter_map(|(t, &l)| (l == 0).then_some(t))
        .collect();
    let required = min_retained(obs.dim());
    if keep.len() < required {
        return Err(Error::TooFewRetained {
            retained: keep.len(),
            required,
        });
    }
    let subset = obs.select(&keep)?;
    let (whitening, white) = whiten(&subset)?;
    run_ica(&white, &whitening, algorithm, seed)
}

fn finish(
    obs: &ObservationSet,
    labels: Vec<u8>,
    report: Option<ScoreReport>,
    unmixing: UnmixingEstimate,
) -> SeparationResult {
    let retained_count = labels.iter().filter(|&&l| l == 0).count();
    SeparationResult {
        s_hat: &unmixing.b_hat * obs.matrix(),
        unmixing,
        report,
        labels,
        retained_count,
    }
}

/// Classify, unmix the retained samples, apply to all samples.
pub fn separate(
    obs: &ObservationSet,
    config: &SeparationConfig,
    seed: u64,
) -> Result<SeparationResult> {
    separate_with(obs, &config.classifier, &config.ica, seed)
}

/// [`separate`] with an arbitrary ICA algorithm.
pub fn separate_with(
    obs: &ObservationSet,
    classifier: &ClassifierConfig,
    algorithm: &dyn IcaAlgorithm,
    seed: u64,
) -> Result<SeparationResult> {
    let report = classify(obs, classifier)?;
    let labels = report.labels.clone();
    let unmixing = unmix_subset(obs, &labels, algorithm, seed)?;
    Ok(finish(obs, labels, Some(report), unmixing))
}

/// Same pipeline with the labels supplied instead of estimated.
pub fn separate_supervised(
    obs: &ObservationSet,
    labels: &[u8],
    algorithm: &dyn IcaAlgorithm,
    seed: u64,
) -> Result<SeparationResult> {
    let unmixing = unmix_subset(obs, labels, algorithm, seed)?;
    Ok(finish(obs, labels.to_vec(), None, unmixing))
}

/// Plain ICA on every sample: the pipeline with all labels set to 0.
pub fn separate_ignoring_classes(
    obs: &ObservationSet,
    algorithm: &dyn IcaAlgorithm,
    seed: u64,
) -> Result<SeparationResult> {
    separate_supervised(obs, &vec![0; obs.len()], algorithm, seed)
}
