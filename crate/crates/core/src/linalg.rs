//! Dense symmetric solves on the anchored (gauge-fixed) subspace.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

/// Indices kept after removing the gauge coordinates.
pub fn kept_indices(n: usize, removed: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !removed.contains(i)).collect()
}

/// Principal submatrix on `keep`.
pub fn principal_submatrix(m: &DMatrix<f64>, keep: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(keep.len(), keep.len(), |i, j| m[(keep[i], keep[j])])
}

/// Solves `H[keep, keep] z = b[keep]` by Cholesky and scatters `z` back into a
/// full-length vector with zeros on the removed coordinates. Returns `None`
/// when the reduced matrix is not positive definite.
pub fn solve_reduced_spd(h: &DMatrix<f64>, b: &[f64], keep: &[usize]) -> Option<Vec<f64>> {
    let reduced = principal_submatrix(h, keep);
    let rhs = DVector::from_iterator(keep.len(), keep.iter().map(|&i| b[i]));
    let chol = Cholesky::new(reduced)?;
    let z = chol.solve(&rhs);
    if z.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut out = vec![0.0; b.len()];
    for (k, &i) in keep.iter().enumerate() {
        out[i] = z[k];
    }
    Some(out)
}

/// Smallest eigenvalue of the principal submatrix on `keep`.
pub fn min_eigenvalue_reduced(h: &DMatrix<f64>, keep: &[usize]) -> f64 {
    let reduced = principal_submatrix(h, keep);
    SymmetricEigen::new(reduced)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}
