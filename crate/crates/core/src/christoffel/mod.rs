//! Empirical moment matrices, inverse Christoffel scores and the
//! threshold classifier built on them.
//!
//! For samples `x_1..x_T` and degree `d` the moment matrix is
//! `M = (1/T) Σ_t [x_t]_d [x_t]_dᵀ` and the score of a point is
//! `θ(x) = [x]_dᵀ M⁻¹ [x]_d`, the reciprocal of the empirical Christoffel
//! function. Points of the singular component sit where some polynomials
//! nearly vanish on the data, which keeps their scores low; samples with
//! `θ_t > η·C(n+d, n)` are labelled 0 (regular component), the rest 1.
//!
//! Scores are invariant under invertible affine maps of the data. The
//! classifier exploits this by default and builds the moment matrix in a
//! standardised frame (centred, unit covariance), which gives the same
//! scores with a far better conditioned matrix. See [`Frame`].

mod moment;
mod observations;
mod oracle;
mod score;

pub use moment::{
    Conditioning, Frame, MomentMatrix, MomentOptions, DEFAULT_BASIS_CAP, DEFAULT_RELATIVE_CUTOFF,
};
pub use observations::{FirstOrderStats, ObservationSet};
pub use oracle::variational_oracle;
pub use score::{
    check_eta, classify, classify_detailed, labels_from_scores, threshold, ClassifierConfig,
    ScoreReport, DEFAULT_DEGREE,
};
