//! Seeded generators for two-component source mixtures.
//!
//! Each source sample comes from the regular component `P0` (independent,
//! centred, unit-variance uniforms) with probability `η`, and from a
//! singular component `P1` supported on an algebraic set otherwise. The
//! sources are mixed by a random Gaussian matrix `A` so that `X = A·S`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::christoffel::ObservationSet;
use crate::error::{Error, Result};
use crate::linalg::condition_number;

/// Mixing matrices with a larger 2-norm condition number are redrawn.
pub const MAX_MIXING_CONDITION: f64 = 1e6;

/// Half-width of the centred uniform law with unit variance.
pub fn unit_uniform_half_width() -> f64 {
    3f64.sqrt()
}

/// SplitMix64 finaliser.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sub-stream `index` of `seed`. Trial `k` of an experiment uses
/// `derive_seed(seed, k)`, so trial data do not depend on execution order.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// User-supplied generator for the singular component.
pub trait ColumnGenerator: Send + Sync {
    /// Number of rows of the generated matrix.
    fn dim(&self) -> usize;
    /// Returns a `dim × count` matrix of samples.
    fn generate(&self, count: usize, rng: &mut dyn RngCore) -> DMatrix<f64>;
}

struct FnGenerator<F> {
    dim: usize,
    f: F,
}

impl<F> ColumnGenerator for FnGenerator<F>
where
    F: Fn(&mut dyn RngCore) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn generate(&self, count: usize, rng: &mut dyn RngCore) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, count);
        for mut col in out.column_iter_mut() {
            let v = (self.f)(rng);
            assert_eq!(
                v.len(),
                self.dim,
                "generator returned a sample of the wrong length"
            );
            col.copy_from_slice(&v);
        }
        out
    }
}

/// Named handle to a [`ColumnGenerator`].
#[derive(Clone)]
pub struct PluggableP1 {
    pub name: String,
    pub generator: Arc<dyn ColumnGenerator>,
}

impl PluggableP1 {
    pub fn new(name: impl Into<String>, generator: Arc<dyn ColumnGenerator>) -> Self {
        Self {
            name: name.into(),
            generator,
        }
    }

    /// Wraps a closure producing one sample (of length `dim`) per call.
    pub fn from_fn<F>(name: impl Into<String>, dim: usize, f: F) -> Self
    where
        F: Fn(&mut dyn RngCore) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::new(name, Arc::new(FnGenerator { dim, f }))
    }
}

impl fmt::Debug for PluggableP1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PluggableP1")
            .field("name", &self.name)
            .field("dim", &self.generator.dim())
            .finish()
    }
}

impl PartialEq for PluggableP1 {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && Arc::ptr_eq(&self.generator, &other.generator)
    }
}

fn default_beta() -> f64 {
    1.5
}

fn default_vanish() -> [usize; 2] {
    [3, 4]
}

/// Singular component of the source law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum P1Kind {
    /// `s1 ~ U[−β, β]`, `s2 ~ U[−γ, γ]`, `s3 = s1³/β²`.
    #[serde(rename = "cubic_curve_3d")]
    CubicCurve3D {
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default)]
        gamma: f64,
    },
    /// Regular uniforms with the two listed (0-based) components set to 0.
    #[serde(rename = "vanishing_pair_5d")]
    VanishingPair5D {
        #[serde(default = "default_vanish")]
        indices: [usize; 2],
    },
    /// Arbitrary generator; not serialisable.
    #[serde(skip)]
    Pluggable(PluggableP1),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub n: usize,
    /// Probability of the regular component, `P(r = 0)`.
    pub eta: f64,
    pub p1: P1Kind,
}

impl MixtureSpec {
    /// Three sources on the cubic curve with the given `γ` (and `β = 3/2`).
    pub fn cubic(eta: f64, gamma: f64) -> Self {
        Self {
            n: 3,
            eta,
            p1: P1Kind::CubicCurve3D {
                beta: default_beta(),
                gamma,
            },
        }
    }

    /// Five sources with components 4 and 5 switched off under `P1`.
    pub fn vanishing(eta: f64) -> Self {
        Self {
            n: 5,
            eta,
            p1: P1Kind::VanishingPair5D {
                indices: default_vanish(),
            },
        }
    }

    pub fn pluggable(eta: f64, p1: PluggableP1) -> Self {
        Self {
            n: p1.generator.dim(),
            eta,
            p1: P1Kind::Pluggable(p1),
        }
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        Self {
            eta,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::christoffel::check_eta(self.eta)?;
        if self.n == 0 {
            return Err(Error::ZeroDimension);
        }
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        match &self.p1 {
            P1Kind::CubicCurve3D { beta, gamma } => {
                if self.n != 3 {
                    return bad(format!("cubic_curve_3d needs n = 3, got {}", self.n));
                }
                if !(*beta > 0.0 && beta.is_finite()) || !(*gamma >= 0.0 && gamma.is_finite()) {
                    return bad(format!("need beta > 0 and gamma >= 0, got {beta}, {gamma}"));
                }
            }
            P1Kind::VanishingPair5D { indices } => {
                if self.n != 5 {
                    return bad(format!("vanishing_pair_5d needs n = 5, got {}", self.n));
                }
                if indices[0] == indices[1] || indices.iter().any(|&i| i >= 5) {
                    return bad(format!(
                        "need two distinct indices below 5, got {indices:?}"
                    ));
                }
            }
            P1Kind::Pluggable(p) => {
                if p.generator.dim() != self.n {
                    return bad(format!(
                        "generator '{}' has dimension {}, spec says {}",
                        p.name,
                        p.generator.dim(),
                        self.n
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Sources, labels, mixing matrix and observations of one draw.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedData {
    pub s: DMatrix<f64>,
    /// True `r_t`: 0 for the regular component, 1 for the singular one.
    pub labels: Vec<u8>,
    pub a: DMatrix<f64>,
    pub x: DMatrix<f64>,
}

impl GeneratedData {
    pub fn observations(&self) -> Result<ObservationSet> {
        ObservationSet::new(self.x.clone())
    }

    /// Fraction of samples from the regular component.
    pub fn regular_fraction(&self) -> f64 {
        self.labels.iter().filter(|&&l| l == 0).count() as f64 / self.labels.len().max(1) as f64
    }
}

fn uniform_matrix(
    rows: usize,
    cols: usize,
    half_width: f64,
    rng: &mut dyn RngCore,
) -> DMatrix<f64> {
    if half_width == 0.0 {
        return DMatrix::zeros(rows, cols);
    }
    let law = Uniform::new_inclusive(-half_width, half_width).expect("finite positive width");
    DMatrix::from_fn(rows, cols, |_, _| law.sample(rng))
}

/// `n × t0` matrix of i.i.d. `U[−√3, √3]` entries.
pub fn gen_p0(n: usize, t0: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    uniform_matrix(n, t0, unit_uniform_half_width(), &mut rng)
}

fn cubic_columns(t1: usize, beta: f64, gamma: f64, rng: &mut dyn RngCore) -> DMatrix<f64> {
    let s1 = uniform_matrix(1, t1, beta, rng);
    let s2 = uniform_matrix(1, t1, gamma, rng);
    let b2 = beta * beta;
    DMatrix::from_fn(3, t1, |i, t| match i {
        0 => s1[t],
        1 => s2[t],
        _ => s1[t] * s1[t] * s1[t] / b2,
    })
}

/// `3 × t1` samples on the surface `β² s3 = s1³`, `|s2| ≤ γ`.
pub fn gen_p1_cubic(t1: usize, beta: f64, gamma: f64, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cubic_columns(t1, beta, gamma, &mut rng)
}

fn vanishing_columns(t1: usize, indices: [usize; 2], rng: &mut dyn RngCore) -> DMatrix<f64> {
    let mut s = uniform_matrix(5, t1, unit_uniform_half_width(), rng);
    for &i in &indices {
        s.row_mut(i).fill(0.0);
    }
    s
}

/// `5 × t1` samples whose rows 4 and 5 are zero and rows 1–3 are unit uniforms.
pub fn gen_p1_vanishing(t1: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vanishing_columns(t1, default_vanish(), &mut rng)
}

fn draw_mixing(n: usize, rng: &mut dyn RngCore) -> DMatrix<f64> {
    loop {
        let a = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut *rng));
        if condition_number(&a) <= MAX_MIXING_CONDITION {
            return a;
        }
    }
}

/// Draws `T` labelled sources from `spec`, a mixing matrix, and `X = A·S`.
pub fn gen_mixture(spec: &MixtureSpec, t: usize, seed: u64) -> Result<GeneratedData> {
    spec.validate()?;
    let n = spec.n;
    let mut label_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let labels: Vec<u8> = (0..t)
        .map(|_| {
            if label_rng.random::<f64>() < spec.eta {
                0
            } else {
                1
            }
        })
        .collect();
    let t1 = labels.iter().filter(|&&l| l == 1).count();
    let p0 = gen_p0(n, t - t1, derive_seed(seed, 1));
    let mut p1_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let p1 = match &spec.p1 {
        P1Kind::CubicCurve3D { beta, gamma } => cubic_columns(t1, *beta, *gamma, &mut p1_rng),
        P1Kind::VanishingPair5D { indices } => vanishing_columns(t1, *indices, &mut p1_rng),
        P1Kind::Pluggable(p) => p.generator.generate(t1, &mut p1_rng),
    };
    if p1.shape() != (n, t1) || p1.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSpec(
            "singular-component generator returned a malformed matrix".into(),
        ));
    }

    let mut s = DMatrix::zeros(n, t);
    let (mut k0, mut k1) = (0, 0);
    for (col, &label) in labels.iter().enumerate() {
        if label == 0 {
            s.set_column(col, &p0.column(k0));
            k0 += 1;
        } else {
            s.set_column(col, &p1.column(k1));
            k1 += 1;
        }
    }
    let mut mix_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3));
    let a = draw_mixing(n, &mut mix_rng);
    let x = &a * &s;
    Ok(GeneratedData { s, labels, a, x })
}
