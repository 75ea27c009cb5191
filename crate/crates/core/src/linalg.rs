//! Small dense helpers shared by the covariance and structural checks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Outcome of the PSD + kernel check on a relative covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdKernelCheck {
    pub min_eigenvalue: f64,
    pub kernel_residual: f64,
    pub norm: f64,
    pub passed: bool,
}

/// Checks `λ_min(τ) ≥ −tol·(1+‖τ‖)` and `‖τ w‖ ≤ tol·(1+‖τ‖)`.
pub fn check_psd_kernel(tau: &DMatrix<f64>, reference: &[f64], tol: f64) -> PsdKernelCheck {
    let norm = tau.norm();
    let w = DVector::from_column_slice(reference);
    let kernel_residual = (tau * w).norm();
    let min_eigenvalue = min_eigenvalue(tau);
    let scale = 1.0 + norm;
    PsdKernelCheck {
        min_eigenvalue,
        kernel_residual,
        norm,
        passed: min_eigenvalue >= -tol * scale && kernel_residual <= tol * scale,
    }
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    let scale = 1.0 + m.amax();
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}
