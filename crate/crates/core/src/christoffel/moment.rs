use std::ops::Range;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::observations::{FirstOrderStats, ObservationSet};
use crate::error::{Error, Result};
use crate::linalg::{self, SymEigen};
use crate::polybasis::MonomialBasis;

/// Largest basis size accepted unless configured otherwise.
pub const DEFAULT_BASIS_CAP: usize = 5000;

/// Eigenvalues below this fraction of the largest one are truncated.
pub const DEFAULT_RELATIVE_CUTOFF: f64 = 1e-10;

/// Samples per leaf of the summation tree.
const LEAF: usize = 128;

/// Coordinates in which the monomials are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Monomials of the observations as given.
    #[default]
    Raw,
    /// Monomials of `Σ^{-1/2}(x − μ)`. Scores are unchanged (affine
    /// invariance) but the matrix is much better conditioned. Falls back
    /// to [`Frame::Raw`] when the covariance is singular.
    Standardized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentOptions {
    pub frame: Frame,
    pub basis_cap: usize,
    pub relative_cutoff: f64,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self {
            frame: Frame::Raw,
            basis_cap: DEFAULT_BASIS_CAP,
            relative_cutoff: DEFAULT_RELATIVE_CUTOFF,
        }
    }
}

/// Spectral summary of the solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Conditioning {
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// Eigen-directions used in the (pseudo-)inverse.
    pub kept: usize,
    /// Eigen-directions dropped by the cutoff.
    pub truncated: usize,
}

impl Conditioning {
    pub fn condition_number(&self) -> f64 {
        if self.lambda_min > 0.0 {
            self.lambda_max / self.lambda_min
        } else {
            f64::INFINITY
        }
    }
}

/// `z = L (x − shift)`.
#[derive(Debug, Clone)]
struct AffineMap {
    shift: DVector<f64>,
    linear: DMatrix<f64>,
}

impl AffineMap {
    fn standardizing(obs: &ObservationSet) -> Option<Self> {
        let stats = FirstOrderStats::from_observations(obs);
        let eig = SymEigen::new(stats.sigma);
        let max = eig.max_value();
        if max.is_nan() || max <= 0.0 || eig.values.min() <= max * 1e-12 {
            return None;
        }
        let n = obs.dim();
        let scaled = DMatrix::from_fn(n, n, |i, k| eig.vectors[(i, k)] / eig.values[k].sqrt());
        Some(Self {
            shift: stats.mu,
            linear: scaled * eig.vectors.transpose(),
        })
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.shift.len();
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..n)
                .map(|j| self.linear[(i, j)] * (x[j] - self.shift[j]))
                .sum();
        }
    }
}

/// Empirical moment matrix of degree `d`, with its factorised inverse.
#[derive(Debug, Clone)]
pub struct MomentMatrix {
    matrix: DMatrix<f64>,
    basis: MonomialBasis,
    samples: usize,
    map: Option<AffineMap>,
    eigen: SymEigen,
    /// `Λ_kept^{-1/2} Q_keptᵀ`; a score is the squared norm of `projector·[x]_d`.
    projector: DMatrix<f64>,
    conditioning: Conditioning,
}

impl MomentMatrix {
    /// Raw-frame moment matrix with default cap and cutoff.
    pub fn build(obs: &ObservationSet, d: usize) -> Result<Self> {
        Self::with_options(obs, d, &MomentOptions::default())
    }

    pub fn with_options(obs: &ObservationSet, d: usize, opts: &MomentOptions) -> Result<Self> {
        let n = obs.dim();
        let size = crate::polybasis::basis_size(n, d)?;
        if size > opts.basis_cap {
            return Err(Error::BasisTooLarge {
                size,
                cap: opts.basis_cap,
            });
        }
        let basis = MonomialBasis::new(n, d)?;
        let map = match opts.frame {
            Frame::Raw => None,
            Frame::Standardized => {
                let map = AffineMap::standardizing(obs);
                if map.is_none() {
                    warn!("covariance is singular; building the moment matrix in the raw frame");
                }
                map
            }
        };

        let t = obs.len();
        let mut matrix = gram(obs, &basis, map.as_ref(), 0..t);
        matrix /= t as f64;
        linalg::symmetrize(&mut matrix);
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteMoments(d));
        }

        let eigen = SymEigen::new(matrix.clone());
        let lambda_max = eigen.max_value();
        if lambda_max.is_nan() || lambda_max <= 0.0 {
            return Err(Error::SingularMoment);
        }
        let floor = opts.relative_cutoff * lambda_max;
        let kept: Vec<usize> = (0..size).filter(|&k| eigen.values[k] > floor).collect();
        let projector = DMatrix::from_fn(kept.len(), size, |r, j| {
            let k = kept[r];
            eigen.vectors[(j, k)] / eigen.values[k].sqrt()
        });
        let conditioning = Conditioning {
            lambda_max,
            lambda_min: eigen.values[0],
            kept: kept.len(),
            truncated: size - kept.len(),
        };
        if conditioning.truncated > 0 {
            warn!(
                "moment matrix (n={n}, d={d}, m={size}) is ill-conditioned: {} of {size} \
                 eigen-directions below {:.1e}·λmax were truncated",
                conditioning.truncated, opts.relative_cutoff
            );
        }
        Ok(Self {
            matrix,
            basis,
            samples: t,
            map,
            eigen,
            projector,
            conditioning,
        })
    }

    /// The matrix itself, expressed in the frame it was built in.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.n()
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    /// Basis size `m`.
    pub fn size(&self) -> usize {
        self.basis.len()
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn frame(&self) -> Frame {
        if self.map.is_some() {
            Frame::Standardized
        } else {
            Frame::Raw
        }
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigen.values
    }

    pub fn conditioning(&self) -> Conditioning {
        self.conditioning
    }

    /// True when the cutoff dropped at least one direction, i.e. scores use
    /// a pseudo-inverse.
    pub fn is_truncated(&self) -> bool {
        self.conditioning.truncated > 0
    }

    /// Embedding of `x` in the coordinates of this matrix.
    pub fn embed(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_dim(x.len())?;
        let mut v = DVector::zeros(self.size());
        self.embed_into(x, v.as_mut_slice());
        Ok(v)
    }

    fn embed_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.map {
            None => self.basis.embed_into(x, out),
            Some(map) => {
                let mut z = vec![0.0; x.len()];
                map.apply(x, &mut z);
                self.basis.embed_into(&z, out);
            }
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    /// `M⁻¹ v` through the truncated eigendecomposition.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let y = &self.projector * v;
        self.projector.transpose() * y
    }

    /// `θ(x) = [x]ᵀ M⁻¹ [x]`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let v = self.embed(x)?;
        Ok((&self.projector * v).norm_squared())
    }

    /// Christoffel–Darboux kernel `[x]ᵀ M⁻¹ [y]`.
    pub fn kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let px = &self.projector * self.embed(x)?;
        let py = &self.projector * self.embed(y)?;
        Ok(px.dot(&py))
    }

    /// Empirical Christoffel function `1/θ(x)`.
    pub fn christoffel_value(&self, x: &[f64]) -> Result<f64> {
        Ok(1.0 / self.score(x)?)
    }

    /// Scores of every sample in `obs`, computed block-wise.
    pub fn scores(&self, obs: &ObservationSet) -> Result<Vec<f64>> {
        self.check_dim(obs.dim())?;
        let t = obs.len();
        let blocks: Vec<Range<usize>> = (0..t)
            .step_by(LEAF * 4)
            .map(|s| s..(s + LEAF * 4).min(t))
            .collect();
        use rayon::prelude::*;
        let parts: Vec<Vec<f64>> = blocks
            .into_par_iter()
            .map(|range| {
                let v = embed_block(obs, &self.basis, self.map.as_ref(), range);
                let y = &self.projector * v;
                y.column_iter().map(|c| c.norm_squared()).collect()
            })
            .collect();
        Ok(parts.concat())
    }
}

/// `m × |range|` matrix of embedded samples.
fn embed_block(
    obs: &ObservationSet,
    basis: &MonomialBasis,
    map: Option<&AffineMap>,
    range: Range<usize>,
) -> DMatrix<f64> {
    let m = basis.len();
    let mut v = DMatrix::zeros(m, range.len());
    let mut z = vec![0.0; obs.dim()];
    for (col, t) in range.enumerate() {
        let x = obs.sample(t);
        let out = &mut v.as_mut_slice()[col * m..(col + 1) * m];
        match map {
            None => basis.embed_into(x, out),
            Some(map) => {
                map.apply(x, &mut z);
                basis.embed_into(&z, out);
            }
        }
    }
    v
}

/// `Σ_{t ∈ range} [x_t][x_t]ᵀ` by pairwise summation. The split points
/// depend only on the range, so the result does not depend on how rayon
/// schedules the halves.
fn gram(
    obs: &ObservationSet,
    basis: &MonomialBasis,
    map: Option<&AffineMap>,
    range: Range<usize>,
) -> DMatrix<f64> {
    if range.len() <= LEAF {
        let v = embed_block(obs, basis, map, range);
        return &v * v.transpose();
    }
    let leaves = range.len().div_ceil(LEAF);
    let mid = range.start + (leaves / 2) * LEAF;
    let (mut left, right) = rayon::join(
        || gram(obs, basis, map, range.start..mid),
        || gram(obs, basis, map, mid..range.end),
    );
    left += right;
    left
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_obs(n: usize, t: usize, seed: u64) -> ObservationSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ObservationSet::new(DMatrix::from_fn(n, t, |_, _| rng.random_range(-1.5..1.5))).unwrap()
    }

    #[test]
    fn two_point_example() {
        let obs = ObservationSet::from_samples(&[vec![0.0], vec![1.0]]).unwrap();
        let m = MomentMatrix::build(&obs, 1).unwrap();
        assert_eq!(
            m.matrix(),
            &DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.5])
        );
    }

    #[test]
    fn single_sample_is_rank_one() {
        let obs = ObservationSet::from_samples(&[vec![0.7, -1.2]]).unwrap();
        let m = MomentMatrix::build(&obs, 2).unwrap();
        let v = obs_embed(&m, &[0.7, -1.2]);
        assert!(max_abs(&(m.matrix() - &v * v.transpose())) < 1e-15);
        assert_eq!(m.conditioning().kept, 1);
        assert!(m.is_truncated());
    }

    fn obs_embed(m: &MomentMatrix, x: &[f64]) -> DVector<f64> {
        m.embed(x).unwrap()
    }

    #[test]
    fn constant_entry_is_one_and_matrix_is_symmetric_psd() {
        for frame in [Frame::Raw, Frame::Standardized] {
            let obs = random_obs(3, 700, 4);
            let opts = MomentOptions {
                frame,
                ..Default::default()
            };
            let m = MomentMatrix::with_options(&obs, 4, &opts).unwrap();
            assert!((m.matrix()[(0, 0)] - 1.0).abs() < 1e-14);
            let scale = max_abs(m.matrix());
            assert!(max_abs(&(m.matrix() - m.matrix().transpose())) <= 1e-12 * scale);
            assert!(m.eigenvalues()[0] >= -1e-10 * m.conditioning().lambda_max);
        }
    }

    #[test]
    fn tree_sum_matches_naive_sum() {
        let obs = random_obs(2, 1000, 9);
        let m = MomentMatrix::build(&obs, 3).unwrap();
        let mut naive = DMatrix::zeros(m.size(), m.size());
        for t in 0..obs.len() {
            let v = m.embed(obs.sample(t)).unwrap();
            naive += &v * v.transpose();
        }
        naive /= obs.len() as f64;
        assert!(max_abs(&(naive - m.matrix())) < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        let obs = random_obs(5, 10, 1);
        let opts = MomentOptions {
            basis_cap: 400,
            ..Default::default()
        };
        assert!(matches!(
            MomentMatrix::with_options(&obs, 6, &opts),
            Err(Error::BasisTooLarge {
                size: 462,
                cap: 400
            })
        ));
    }

    #[test]
    fn score_of_mean_at_degree_one_is_one() {
        let obs = random_obs(3, 500, 2);
        let m = MomentMatrix::build(&obs, 1).unwrap();
        let mu = obs.matrix().column_mean();
        assert!((m.score(mu.as_slice()).unwrap() - 1.0).abs() < 1e-12);
        assert!((m.christoffel_value(mu.as_slice()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_is_symmetric_and_matches_score() {
        let obs = random_obs(2, 400, 3);
        let m = MomentMatrix::build(&obs, 3).unwrap();
        let (x, y) = ([0.3, -0.8], [1.1, 0.2]);
        let kxy = m.kernel(&x, &y).unwrap();
        let kyx = m.kernel(&y, &x).unwrap();
        assert!((kxy - kyx).abs() <= 1e-12 * kxy.abs().max(1.0));
        let kxx = m.kernel(&x, &x).unwrap();
        assert!((kxx - m.score(&x).unwrap()).abs() <= 1e-12 * kxx);
        // same value through the explicit solve
        let v = m.embed(&x).unwrap();
        assert!((v.dot(&m.solve(&v)) - kxx).abs() <= 1e-9 * kxx);
    }

    #[test]
    fn batch_scores_match_pointwise() {
        let obs = random_obs(3, 1100, 5);
        let m = MomentMatrix::build(&obs, 2).unwrap();
        let batch = m.scores(&obs).unwrap();
        for t in [0, 511, 512, 1099] {
            let single = m.score(obs.sample(t)).unwrap();
            assert!((batch[t] - single).abs() <= 1e-12 * single);
        }
        assert!(batch.iter().all(|&s| s > 0.0));
        assert!(matches!(
            m.scores(&random_obs(2, 5, 1)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn standardized_frame_falls_back_on_singular_covariance() {
        let obs = ObservationSet::from_samples(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]])
            .unwrap();
        let opts = MomentOptions {
            frame: Frame::Standardized,
            ..Default::default()
        };
        let m = MomentMatrix::with_options(&obs, 1, &opts).unwrap();
        assert_eq!(m.frame(), Frame::Raw);
        assert!(m.is_truncated());
    }

    #[test]
    fn overflow_is_reported() {
        let obs = ObservationSet::from_samples(&[vec![1e200], vec![-1e200]]).unwrap();
        assert!(matches!(
            MomentMatrix::build(&obs, 2),
            Err(Error::NonFiniteMoments(2))
        ));
    }
}
