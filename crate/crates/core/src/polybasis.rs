//! Monomial bases of polynomials of bounded total degree.
//!
//! A basis for `n` variables and maximal degree `d` holds every exponent
//! vector `α ∈ ℕⁿ` with `|α| ≤ d`, listed in graded lexicographic order:
//! ascending total degree, then descending exponent of `x1`, then of `x2`,
//! and so on. For `n = 2, d = 2` this gives `1, x1, x2, x1², x1x2, x2²`.
//!
//! On disk a basis is a JSON array of exponent arrays in that order, e.g.
//! `[[0,0],[1,0],[0,1],[2,0],[1,1],[0,2]]`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exponent vector of a single monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self(exponents)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total degree `|α|`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Evaluates the monomial directly with `powi`. Used as a reference
    /// against the incremental embedding.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if wrote {
                f.write_str("*")?;
            }
            match e {
                1 => write!(f, "x{}", i + 1)?,
                _ => write!(f, "x{}^{}", i + 1, e)?,
            }
            wrote = true;
        }
        if !wrote {
            f.write_str("1")?;
        }
        Ok(())
    }
}

/// Size of the basis of polynomials of degree at most `d` in `n` variables,
/// `C(n+d, n)`, computed in exact integer arithmetic.
pub fn basis_size(n: usize, d: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::ZeroDimension);
    }
    let overflow = || Error::BasisOverflow { n, d };
    let total = n.checked_add(d).ok_or_else(overflow)?;
    let k = n.min(d);
    // C(total, k) built as a running product of exact binomials C(total-k+i, i).
    let mut c: u128 = 1;
    for i in 1..=k {
        let factor = (total - k + i) as u128;
        c = c.checked_mul(factor).ok_or_else(overflow)? / i as u128;
    }
    usize::try_from(c).map_err(|_| overflow())
}

/// Ordered monomial basis together with the recurrence used to evaluate it.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    n: usize,
    d: usize,
    indices: Vec<MultiIndex>,
    /// For entry `k > 0`, `(parent, var)` with `α_k = α_parent + e_var`.
    steps: Vec<(usize, usize)>,
}

/// Enumerates the graded-lex basis for `n` variables and degree `d`.
pub fn enumerate_basis(n: usize, d: usize) -> Result<MonomialBasis> {
    MonomialBasis::new(n, d)
}

impl MonomialBasis {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        let size = basis_size(n, d)?;
        let mut indices = Vec::with_capacity(size);
        let mut scratch = vec![0u32; n];
        for degree in 0..=d as u32 {
            push_compositions(&mut scratch, 0, degree, &mut indices);
        }
        debug_assert_eq!(indices.len(), size);

        let position: HashMap<&MultiIndex, usize> =
            indices.iter().enumerate().map(|(k, a)| (a, k)).collect();
        let mut steps = Vec::with_capacity(size.saturating_sub(1));
        for alpha in indices.iter().skip(1) {
            let var = alpha
                .0
                .iter()
                .position(|&e| e > 0)
                .expect("non-constant monomial has a positive exponent");
            let mut parent = alpha.0.clone();
            parent[var] -= 1;
            let parent = position[&MultiIndex(parent)];
            steps.push((parent, var));
        }
        Ok(Self {
            n,
            d,
            indices,
            steps,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Position of `alpha` in the basis, if present.
    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.indices.iter().position(|a| a == alpha)
    }

    /// Evaluates every monomial at `x`.
    pub fn embed(&self, x: &[f64]) -> Result<EmbeddedVector> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.len()];
        self.embed_into(x, &mut out);
        Ok(EmbeddedVector(out))
    }

    /// Writes the embedding of `x` into `out`. Each entry is one
    /// multiplication away from an earlier one, so the cost is `O(len)`.
    ///
    /// Panics if `x.len() != n` or `out.len() != len()`.
    pub fn embed_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n, "sample dimension");
        assert_eq!(out.len(), self.len(), "embedding length");
        out[0] = 1.0;
        for (k, &(parent, var)) in self.steps.iter().enumerate() {
            out[k + 1] = out[parent] * x[var];
        }
    }
}

/// Pushes all exponent vectors with `scratch[..pos]` fixed and the remaining
/// entries summing to `remaining`, largest leading exponent first.
fn push_compositions(scratch: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if pos + 1 == scratch.len() {
        scratch[pos] = remaining;
        out.push(MultiIndex(scratch.to_vec()));
        return;
    }
    for e in (0..=remaining).rev() {
        scratch[pos] = e;
        push_compositions(scratch, pos + 1, remaining - e, out);
    }
    scratch[pos] = 0;
}

impl Serialize for MonomialBasis {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.indices.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MonomialBasis {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let indices = Vec::<MultiIndex>::deserialize(deserializer)?;
        let first = indices
            .first()
            .ok_or_else(|| D::Error::custom("empty basis"))?;
        let n = first.len();
        let d = indices.iter().map(MultiIndex::degree).max().unwrap_or(0) as usize;
        let basis = MonomialBasis::new(n, d).map_err(D::Error::custom)?;
        if basis.indices != indices {
            return Err(D::Error::custom(format!(
                "exponent list is not the graded-lex basis for n={n}, d={d}"
            )));
        }
        Ok(basis)
    }
}

/// Monomial evaluations `[x]_d` at one point. The first entry is always 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedVector(Vec<f64>);

impl EmbeddedVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Deref for EmbeddedVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}
