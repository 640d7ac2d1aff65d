//! Dense real linear algebra: the matrix type, LU, eigenvalues and the
//! discrete Lyapunov solver.

pub mod eigen;
pub mod lu;
pub mod lyapunov;
pub mod matching;
mod matrix;

pub use eigen::{
    eigen_decompose, eigen_decompose_with, eigenvalues, EigenDecomposition, EigenOptions,
};
pub use lu::{determinant, matrix_inverse, matrix_inverse_with_floor, Lu, DEFAULT_RCOND_FLOOR};
pub use lyapunov::{lyapunov_residual, solve_discrete_lyapunov};
pub use matrix::DenseMatrix;

use crate::error::Result;

pub fn frobenius_norm(m: &DenseMatrix) -> f64 {
    m.frobenius_norm()
}

/// Largest eigenvalue modulus. Not the operator 2-norm: a nilpotent matrix
/// gives zero here.
pub fn spectral_abs_max(m: &DenseMatrix) -> Result<f64> {
    Ok(eigen_decompose(m)?.spectral_radius())
}

pub fn spectral_radius(m: &DenseMatrix) -> Result<f64> {
    spectral_abs_max(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_of_identity_zero_and_nilpotent() {
        let i2 = DenseMatrix::identity(2);
        assert!((frobenius_norm(&i2) - 2f64.sqrt()).abs() < 1e-15);
        assert!((spectral_abs_max(&i2).unwrap() - 1.0).abs() < 1e-15);
        let z = DenseMatrix::zeros(3, 3);
        assert_eq!(frobenius_norm(&z), 0.0);
        assert_eq!(spectral_abs_max(&z).unwrap(), 0.0);
        let nil = DenseMatrix::from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(frobenius_norm(&nil), 2.0);
        assert_eq!(spectral_abs_max(&nil).unwrap(), 0.0);
    }

    #[test]
    fn radius_of_scaled_identity() {
        let m = DenseMatrix::identity(4).scale(0.7);
        assert!((spectral_radius(&m).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn chain_radius_matches_power_iteration() {
        let n = 10;
        let a = DenseMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { 0.3 } else { 0.0 });
        // power iteration on the (nonnegative, irreducible, but bipartite) chain:
        // iterate on A² to avoid the ±λ oscillation
        let a2 = &a * &a;
        let mut x = vec![1.0; n];
        x[0] = 1.3;
        let mut lam = 0.0;
        for _ in 0..5000 {
            let y = a2.mul_vec(&x);
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            lam = norm / x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x = y.into_iter().map(|v| v / norm).collect();
        }
        let oracle = lam.sqrt();
        assert!((spectral_radius(&a).unwrap() - oracle).abs() < 1e-8);
    }
}
