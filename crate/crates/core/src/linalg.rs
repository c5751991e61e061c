//! Dense linear algebra helpers backed by `nalgebra`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Singular values at or below this threshold are treated as zero:
/// `ε_machine · max(rows, cols) · σ_max`.
pub fn pinv_cutoff(a: &DMatrix<f64>, sigma_max: f64) -> f64 {
    f64::EPSILON * a.nrows().max(a.ncols()) as f64 * sigma_max
}

/// Moore–Penrose pseudoinverse with the effective-rank cutoff of [`pinv_cutoff`].
pub fn pinv(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.is_empty() {
        return Err(Error::domain("pseudoinverse of an empty matrix"));
    }
    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    if sigma_max == 0.0 {
        return Ok(DMatrix::zeros(a.ncols(), a.nrows()));
    }
    let cutoff = pinv_cutoff(a, sigma_max);
    svd.pseudo_inverse(cutoff).map_err(|e| Error::domain(e.to_string()))
}

/// Largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().max()
}
