//! Dense spectral radii.

use nalgebra::DMatrix;

use crate::banded::BandedSymmetricMatrix;

/// Largest eigenvalue modulus of a general square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral radius of a non-square matrix");
    if m.nrows() == 0 {
        return 0.0;
    }
    if m.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Largest eigenvalue modulus of a real symmetric band matrix.
pub fn symmetric_spectral_radius(m: &BandedSymmetricMatrix) -> f64 {
    if m.n() == 0 {
        return 0.0;
    }
    m.to_dense()
        .symmetric_eigenvalues()
        .iter()
        .map(|x| x.abs())
        .fold(0.0, f64::max)
}
