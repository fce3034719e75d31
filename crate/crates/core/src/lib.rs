//! Blind separation of linear mixtures whose sources switch between an
//! ICA-compatible law and a law concentrated on an unknown algebraic set.
//!
//! Samples are scored with the empirical inverse Christoffel function
//! `θ(x) = [x]_dᵀ M̂_d⁻¹ [x]_d`, where `[x]_d` stacks every monomial of total
//! degree at most `d` and `M̂_d` is the empirical moment matrix. Samples whose
//! score exceeds `η·C(n+d, n)` are kept as coming from the absolutely
//! continuous component, and an ICA algorithm is run on those alone to
//! estimate the unmixing matrix.
//!
//! The crate is organised as:
//!
//! - [`polybasis`]: graded-lex monomial bases and the feature embedding.
//! - [`christoffel`]: moment matrices, scores, classification and the
//!   variational cross-check.
//! - [`ica`]: whitening, symmetric fixed-point ICA and the separation pipeline.
//! - [`synthdata`]: seeded generators for the mixture models.
//! - [`evalmetrics`]: ambiguity-resolved MSE, label accuracy and trimmed means.
//! - [`experiment`]: the Monte Carlo grid runner behind the `experiment`
//!   subcommand.
//! - [`io`]: CSV and JSON file formats.

pub mod christoffel;
pub mod error;
pub mod evalmetrics;
pub mod experiment;
pub mod ica;
pub mod io;
pub mod linalg;
pub mod polybasis;
pub mod synthdata;

pub use christoffel::{
    classify, ClassifierConfig, Frame, MomentMatrix, ObservationSet, ScoreReport,
};
pub use error::{Error, Result};
pub use ica::{separate, separate_supervised, SeparationConfig, SeparationResult};
pub use polybasis::{basis_size, enumerate_basis, MonomialBasis};
