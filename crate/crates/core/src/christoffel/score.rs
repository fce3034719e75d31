use log::warn;
use serde::{Deserialize, Serialize};

use super::moment::{
    Frame, MomentMatrix, MomentOptions, DEFAULT_BASIS_CAP, DEFAULT_RELATIVE_CUTOFF,
};
use super::observations::ObservationSet;
use crate::error::{Error, Result};
use crate::polybasis::basis_size;

/// Degree used when none is given.
pub const DEFAULT_DEGREE: usize = 6;

/// `θ̄ = η·C(n+d, n)`.
pub fn threshold(eta: f64, n: usize, d: usize) -> Result<f64> {
    check_eta(eta)?;
    Ok(eta * basis_size(n, d)? as f64)
}

pub fn check_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::InvalidEta(eta))
    }
}

/// Label 0 when `θ_t > θ̄`, label 1 when `θ_t < θ̄`. A tie gets label 0.
pub fn labels_from_scores(theta: &[f64], threshold: f64) -> Vec<u8> {
    theta
        .iter()
        .map(|&s| if s >= threshold { 0 } else { 1 })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub degree: usize,
    /// Weight of the regular component; sets `θ̄ = η·C(n+d, n)`.
    pub eta: f64,
    #[serde(default = "default_frame")]
    pub frame: Frame,
    #[serde(default = "default_cap")]
    pub basis_cap: usize,
    #[serde(default = "default_cutoff")]
    pub relative_cutoff: f64,
}

fn default_frame() -> Frame {
    Frame::Standardized
}

fn default_cap() -> usize {
    DEFAULT_BASIS_CAP
}

fn default_cutoff() -> f64 {
    DEFAULT_RELATIVE_CUTOFF
}

impl ClassifierConfig {
    pub fn new(degree: usize, eta: f64) -> Self {
        Self {
            degree,
            eta,
            frame: default_frame(),
            basis_cap: default_cap(),
            relative_cutoff: default_cutoff(),
        }
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    pub fn moment_options(&self) -> MomentOptions {
        MomentOptions {
            frame: self.frame,
            basis_cap: self.basis_cap,
            relative_cutoff: self.relative_cutoff,
        }
    }
}

/// Scores, threshold and labels for one data set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub theta: Vec<f64>,
    pub threshold: f64,
    pub labels: Vec<u8>,
    pub n: usize,
    pub degree: usize,
    pub eta: f64,
    /// Basis size `C(n+d, n)`.
    pub m: usize,
    /// Set when the eigenvalue cutoff truncated the moment matrix.
    pub condition_warning: bool,
    pub truncated: usize,
    /// Set when `T ≤ m`, where the moment matrix cannot be full rank.
    pub small_sample_warning: bool,
}

impl ScoreReport {
    /// `(#label 0, #label 1)`.
    pub fn counts(&self) -> (usize, usize) {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - ones, ones)
    }

    /// Indices of samples labelled 0.
    pub fn retained(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(t, &l)| (l == 0).then_some(t))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Builds the moment matrix, scores every sample and thresholds the scores.
pub fn classify(obs: &ObservationSet, config: &ClassifierConfig) -> Result<ScoreReport> {
    classify_detailed(obs, config).map(|(report, _)| report)
}

/// Like [`classify`], also returning the moment matrix for further queries.
pub fn classify_detailed(
    obs: &ObservationSet,
    config: &ClassifierConfig,
) -> Result<(ScoreReport, MomentMatrix)> {
    let n = obs.dim();
    let d = config.degree;
    let threshold = threshold(config.eta, n, d)?;
    let m = basis_size(n, d)?;
    let small_sample_warning = obs.len() <= m;
    if small_sample_warning {
        warn!(
            "only {} samples for a basis of size {m}; the moment matrix is rank deficient",
            obs.len()
        );
    }
    let moment = MomentMatrix::with_options(obs, d, &config.moment_options())?;
    let theta = moment.scores(obs)?;
    let labels = labels_from_scores(&theta, threshold);
    let cond = moment.conditioning();
    let report = ScoreReport {
        theta,
        threshold,
        labels,
        n,
        degree: d,
        eta: config.eta,
        m,
        condition_warning: cond.truncated > 0,
        truncated: cond.truncated,
        small_sample_warning,
    };
    Ok((report, moment))
}
