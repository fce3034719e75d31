use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::christoffel::ObservationSet;
use crate::error::{Error, Result};
use crate::linalg::symmetric_orthogonalize;

/// `E[log cosh ν]` for a standard normal `ν`.
const GAUSSIAN_LOGCOSH: f64 = 0.374_567_207_491_438;

const MIN_STEP: f64 = 1.0 / 1024.0;
const MAX_STEP: f64 = 4.0;

/// Contrast function of the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contrast {
    /// `G(y) = y⁴/4`, `g(y) = y³`.
    #[default]
    Kurtosis,
    /// `G(y) = log cosh y`, `g(y) = tanh y`.
    LogCosh,
}

impl Contrast {
    /// Returns `g(y)` and `g'(y)`.
    fn nonlinearity(self, y: f64) -> (f64, f64) {
        match self {
            Contrast::Kurtosis => (y * y * y, 3.0 * y * y),
            Contrast::LogCosh => {
                let th = y.tanh();
                (th, 1.0 - th * th)
            }
        }
    }

    /// Non-Gaussianity of one unit-variance output.
    fn objective(self, y: impl Iterator<Item = f64>, t: f64) -> f64 {
        match self {
            Contrast::Kurtosis => (y.map(|v| v.powi(4)).sum::<f64>() / t - 3.0).abs(),
            Contrast::LogCosh => {
                let e = y.map(|v| v.cosh().ln()).sum::<f64>() / t;
                (e - GAUSSIAN_LOGCOSH).powi(2)
            }
        }
    }
}

struct SampleMoments {
    /// Row-major `n × n`.
    grad: Vec<f64>,
    mean_dg: Vec<f64>,
    beta: Vec<f64>,
}

/// Orthogonal rotation found in whitened coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationEstimate {
    pub rotation: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Interface for ICA algorithms working on whitened data. An algorithm
/// returns an orthogonal matrix whose rows extract the components.
pub trait IcaAlgorithm: Send + Sync {
    fn rotation(&self, white: &ObservationSet, seed: u64) -> Result<RotationEstimate>;
}

/// Symmetric fixed-point ICA in its stabilised Newton form. Each row gets
/// the update direction `Δw = −(E[z g(wᵀz)] − β w) / (E[g'(wᵀz)] − β)`,
/// `β = E[wᵀz g(wᵀz)]`. With `A = ΔW·Wᵀ`, the rows are rotated together by
/// the Cayley transform of `μ·Ω`, `Ω = (A − Aᵀ)/2`, and re-orthogonalised
/// with `W ← (W Wᵀ)^{-1/2} W`. To first order and with `μ = 1` this is the
/// classic symmetric update; the fixed points are the same (`A` symmetric).
///
/// `μ` starts at 1 and is then set by a secant estimate from the last two
/// residuals `Ω`, which turns the slow linear convergence on data that
/// only roughly follows the ICA model into a few iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointIca {
    pub contrast: Contrast,
    pub max_iter: usize,
    /// Stop once no row turns by more than this angle (radians) in one step.
    pub tolerance: f64,
}

impl Default for FixedPointIca {
    fn default() -> Self {
        Self {
            contrast: Contrast::Kurtosis,
            max_iter: 500,
            tolerance: 1e-9,
        }
    }
}

impl FixedPointIca {
    pub fn with_contrast(contrast: Contrast) -> Self {
        Self {
            contrast,
            ..Self::default()
        }
    }

    fn iterate(&self, z: &DMatrix<f64>, init: DMatrix<f64>) -> Result<RotationEstimate> {
        let n = z.nrows();
        let mut w = symmetric_orthogonalize(&init)
            .ok_or_else(|| Error::InvalidArgument("singular ICA initialisation".into()))?;
        let mut previous: Option<(DMatrix<f64>, f64)> = None;
        for iter in 1..=self.max_iter {
            let stats = self.moments(z, &w);
            let mut delta = DMatrix::zeros(n, n);
            for i in 0..n {
                let (b, e) = (stats.beta[i], stats.mean_dg[i]);
                let mut denom = e - b;
                if denom.abs() < 1e-12 {
                    denom = 1e-12_f64.copysign(denom);
                }
                for j in 0..n {
                    delta[(i, j)] = -(stats.grad[i * n + j] - b * w[(i, j)]) / denom;
                }
            }
            let a = &delta * w.transpose();
            let omega = (&a - a.transpose()) * 0.5;
            let step = match &previous {
                Some((last, last_step)) => secant_step(last, *last_step, &omega),
                None => 1.0,
            };
            let half = &omega * (0.5 * step);
            let identity = DMatrix::<f64>::identity(n, n);
            let cayley = (&identity - &half)
                .lu()
                .solve(&(&identity + &half))
                .and_then(|r| symmetric_orthogonalize(&(r * &w)));
            let next = match cayley {
                Some(next) => next,
                None => {
                    return Ok(RotationEstimate {
                        rotation: w,
                        iterations: iter,
                        converged: false,
                    })
                }
            };
            let turn = max_row_angle(&next, &w);
            previous = Some((omega, step));
            w = next;
            if turn < self.tolerance {
                return Ok(RotationEstimate {
                    rotation: w,
                    iterations: iter,
                    converged: true,
                });
            }
        }
        Ok(RotationEstimate {
            rotation: w,
            iterations: self.max_iter,
            converged: false,
        })
    }

    /// One pass over the samples collecting `E[g(y) z]`, `E[g'(y)]` and
    /// `E[y g(y)]` for every row `y = wᵀz`.
    fn moments(&self, z: &DMatrix<f64>, w: &DMatrix<f64>) -> SampleMoments {
        let n = z.nrows();
        let t = z.ncols();
        let w_rows: Vec<f64> = w.transpose().as_slice().to_vec();
        let mut grad = vec![0.0; n * n];
        let mut mean_dg = vec![0.0; n];
        let mut beta = vec![0.0; n];
        for col in z.as_slice().chunks_exact(n) {
            for (i, (w_row, grad_row)) in w_rows
                .chunks_exact(n)
                .zip(grad.chunks_exact_mut(n))
                .enumerate()
            {
                let y: f64 = w_row.iter().zip(col).map(|(a, b)| a * b).sum();
                let (g, dg) = self.contrast.nonlinearity(y);
                mean_dg[i] += dg;
                beta[i] += y * g;
                for (acc, zk) in grad_row.iter_mut().zip(col) {
                    *acc += g * zk;
                }
            }
        }
        let scale = 1.0 / t as f64;
        for v in grad.iter_mut().chain(&mut mean_dg).chain(&mut beta) {
            *v *= scale;
        }
        SampleMoments {
            grad,
            mean_dg,
            beta,
        }
    }

    fn objective(&self, z: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
        let y = w * z;
        let t = z.ncols() as f64;
        y.row_iter()
            .map(|row| self.contrast.objective(row.iter().copied(), t))
            .sum()
    }
}

impl IcaAlgorithm for FixedPointIca {
    /// Starts from the identity; if that run does not converge, restarts
    /// once from a seeded random orthogonal matrix. When neither converges
    /// the run with the larger contrast is returned.
    fn rotation(&self, white: &ObservationSet, seed: u64) -> Result<RotationEstimate> {
        let z = white.matrix();
        let n = z.nrows();
        let first = self.iterate(z, DMatrix::identity(n, n))?;
        if first.converged {
            return Ok(first);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let mut second = self.iterate(z, init)?;
        second.iterations += first.iterations;
        if second.converged
            || self.objective(z, &second.rotation) > self.objective(z, &first.rotation)
        {
            Ok(second)
        } else {
            Ok(RotationEstimate {
                iterations: second.iterations,
                ..first
            })
        }
    }
}

/// Step length from the last two residuals: with `s = μ·Ω_prev` the last
/// move and `y = Ω − Ω_prev`, the residual shrinks along `s` at rate
/// `a = −⟨s, y⟩/⟨s, s⟩` per unit move, so `1/a` zeroes it.
fn secant_step(last: &DMatrix<f64>, last_step: f64, omega: &DMatrix<f64>) -> f64 {
    let s = last * last_step;
    let y = omega - last;
    let sy = s.dot(&y);
    if sy < 0.0 {
        (-s.dot(&s) / sy).clamp(MIN_STEP, MAX_STEP)
    } else {
        1.0
    }
}

/// Largest angle between corresponding rows of two matrices with unit rows,
/// ignoring sign.
fn max_row_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .zip(b.row_iter())
        .map(|(ra, rb)| {
            let diff = (ra - rb).norm();
            let sum = (ra + rb).norm();
            // chord length c between unit vectors spans an angle 2·asin(c/2)
            2.0 * (diff.min(sum) / 2.0).min(1.0).asin()
        })
        .fold(0.0, f64::max)
}
