use nalgebra::{DMatrix, DVector};

use super::moment::MomentMatrix;
use crate::error::{Error, Result};

/// Christoffel function at `z` from its variational form:
/// the minimum of `pᵀ M p` over coefficient vectors with `pᵀ[z]_d = 1`.
///
/// Solved directly from the KKT system
/// `[M v; vᵀ 0] [p; −μ] = [0; 1]` with an LU factorisation, so it shares
/// no code with the eigen-based scores and serves as an independent check
/// of [`MomentMatrix::christoffel_value`]. The system is set up with
/// `v/|v|` and the result divided by `|v|²`.
pub fn variational_oracle(z: &[f64], moment: &MomentMatrix) -> Result<f64> {
    let raw = moment.embed(z)?;
    let norm_sq = raw.norm_squared();
    let v = &raw / norm_sq.sqrt();
    let m = moment.size();
    let mut kkt = DMatrix::zeros(m + 1, m + 1);
    kkt.view_mut((0, 0), (m, m)).copy_from(moment.matrix());
    kkt.view_mut((0, m), (m, 1)).copy_from(&v);
    kkt.view_mut((m, 0), (1, m)).copy_from(&v.transpose());
    let mut rhs = DVector::zeros(m + 1);
    rhs[m] = 1.0;

    let sol = kkt.full_piv_lu().solve(&rhs).ok_or(Error::DegenerateKkt)?;
    let p = sol.rows(0, m);
    let value = p.dot(&(moment.matrix() * p)) / norm_sq;
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::DegenerateKkt);
    }
    Ok(value)
}
