//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(matrix);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(order.len(), order.iter().map(|&k| eig.eigenvalues[k]));
        let vectors = eig.eigenvectors.select_columns(&order);
        Self { values, vectors }
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Flips each eigenvector so that its largest-magnitude entry is positive.
    pub fn canonicalize_signs(&mut self) {
        for mut col in self.vectors.column_iter_mut() {
            let mut pivot = 0.0f64;
            for &v in col.iter() {
                if v.abs() > pivot.abs() {
                    pivot = v;
                }
            }
            if pivot < 0.0 {
                col.neg_mut();
            }
        }
    }
}

/// Mean and `1/T`-normalised covariance of the columns of `data`.
pub fn mean_and_covariance(data: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let t = data.ncols() as f64;
    let mean = data.column_mean();
    let mut centered = data.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    let mut cov = &centered * centered.transpose() / t;
    symmetrize(&mut cov);
    (mean, cov)
}

/// Replaces `a` by `(a + aᵀ)/2`.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// 2-norm condition number; infinite for singular matrices.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Largest entrywise deviation of `qᵀq` from the identity.
pub fn orthogonality_defect(q: &DMatrix<f64>) -> f64 {
    let gram = q.transpose() * q;
    max_abs(&(gram - DMatrix::identity(q.ncols(), q.ncols())))
}

/// `(a aᵀ)^{-1/2} a`, the symmetric orthogonalisation of the rows of `a`.
/// Returns `None` when `a aᵀ` is numerically singular.
pub fn symmetric_orthogonalize(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = SymEigen::new(a * a.transpose());
    let floor = eig.max_value() * 1e-14;
    let min = eig.values.min();
    if min.is_nan() || min <= floor {
        return None;
    }
    let scaled = DMatrix::from_fn(a.nrows(), a.nrows(), |i, k| {
        eig.vectors[(i, k)] / eig.values[k].sqrt()
    });
    Some(scaled * eig.vectors.transpose() * a)
}
