//! Stationary covariance of a stable linear system, `Σ = BΣB' + Ω`.

use super::{spectral_radius, DenseMatrix, Lu};
use crate::error::{Error, Result};

/// Largest dimension solved through the dense `n² × n²` Kronecker system.
/// Above this the doubling iteration is used instead.
pub const KRONECKER_MAX_N: usize = 32;

pub fn solve_discrete_lyapunov(b: &DenseMatrix, omega: &DenseMatrix) -> Result<DenseMatrix> {
    let n = b.require_square("Lyapunov operator B")?;
    let m = omega.require_square("Lyapunov forcing Omega")?;
    if n != m {
        return Err(Error::dim(format!("B is {n}x{n} but Omega is {m}x{m}")));
    }
    let radius = spectral_radius(b)?;
    if radius >= 1.0 {
        return Err(Error::Instability { radius });
    }
    let sigma = if n <= KRONECKER_MAX_N {
        kronecker_solve(b, omega)?
    } else {
        doubling_solve(b, omega)
    };
    Ok(sigma.symmetrize())
}

fn kronecker_solve(b: &DenseMatrix, omega: &DenseMatrix) -> Result<DenseMatrix> {
    let n = b.rows();
    let nn = n * n;
    // (I - B⊗B) vec Σ = vec Ω, column-major vec
    let mut k = b.kron(b).scale(-1.0);
    for i in 0..nn {
        k[(i, i)] += 1.0;
    }
    let rhs = omega.vec();
    let lu = Lu::new(&k)?;
    let mut x = lu.solve_vec(&rhs)?;
    // one step of iterative refinement cleans up most of the LU rounding
    let kx = k.mul_vec(&x);
    let r: Vec<f64> = rhs.iter().zip(&kx).map(|(a, b)| a - b).collect();
    let dx = lu.solve_vec(&r)?;
    for (xi, di) in x.iter_mut().zip(dx) {
        *xi += di;
    }
    Ok(DenseMatrix::from_vec(n, n, &x))
}

/// Smith's doubling: `Σ_{k+1} = Σ_k + B_k Σ_k B_k'`, `B_{k+1} = B_k²`.
/// After k steps this sums the first 2^k terms of `Σ_j B^j Ω B'^j`.
fn doubling_solve(b: &DenseMatrix, omega: &DenseMatrix) -> DenseMatrix {
    let mut sigma = omega.clone();
    let mut bk = b.clone();
    let tol = 1e-16 * (1.0 + omega.frobenius_norm());
    for _ in 0..64 {
        let incr = bk
            .matmul_unchecked(&sigma)
            .matmul_unchecked(&bk.transpose());
        sigma = &sigma + &incr;
        bk = bk.matmul_unchecked(&bk);
        if incr.frobenius_norm() <= tol || bk.max_abs() == 0.0 {
            break;
        }
    }
    sigma
}

/// `‖Σ − BΣB' − Ω‖_F / (1 + ‖Ω‖_F)`.
pub fn lyapunov_residual(b: &DenseMatrix, omega: &DenseMatrix, sigma: &DenseMatrix) -> f64 {
    let bsb = b.matmul_unchecked(sigma).matmul_unchecked(&b.transpose());
    (&(sigma - &bsb) - omega).frobenius_norm() / (1.0 + omega.frobenius_norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_oracle(b: &DenseMatrix, omega: &DenseMatrix, terms: usize) -> DenseMatrix {
        let mut acc = DenseMatrix::zeros(b.rows(), b.rows());
        let mut term = omega.clone();
        for _ in 0..terms {
            acc = &acc + &term;
            term = &(b * &term) * &b.transpose();
        }
        acc
    }

    #[test]
    fn zero_operator_returns_forcing() {
        let s =
            solve_discrete_lyapunov(&DenseMatrix::zeros(3, 3), &DenseMatrix::identity(3)).unwrap();
        assert!((&s - &DenseMatrix::identity(3)).max_abs() < 1e-15);
    }

    #[test]
    fn scalar_multiple_of_identity() {
        let b = DenseMatrix::identity(3).scale(0.5);
        let s = solve_discrete_lyapunov(&b, &DenseMatrix::identity(3)).unwrap();
        assert!((&s - &DenseMatrix::identity(3).scale(4.0 / 3.0)).max_abs() < 1e-13);
    }

    #[test]
    fn matches_series_for_nonsymmetric_b() {
        let b = DenseMatrix::from_fn(6, 6, |i, j| (((i * 11 + j * 5) % 9) as f64 - 4.0) * 0.04);
        let omega = DenseMatrix::from_fn(
            6,
            6,
            |i, j| if i == j { 1.0 + i as f64 * 0.1 } else { 0.05 },
        );
        let s = solve_discrete_lyapunov(&b, &omega).unwrap();
        let rho = spectral_radius(&b).unwrap();
        let k = ((1e-12f64).ln() / (2.0 * rho.ln())).ceil() as usize + 1;
        assert!((&s - &series_oracle(&b, &omega, k)).max_abs() < 1e-8);
        assert!(lyapunov_residual(&b, &omega, &s) < 1e-10);
    }

    #[test]
    fn doubling_path_agrees_with_kronecker() {
        let n = KRONECKER_MAX_N + 4;
        let b = DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.5
            } else if i + 1 == j || j + 1 == i {
                0.2
            } else {
                0.0
            }
        });
        let omega = DenseMatrix::identity(n);
        let s = solve_discrete_lyapunov(&b, &omega).unwrap();
        assert!(lyapunov_residual(&b, &omega, &s) < 1e-10);
        let small = DenseMatrix::from_fn(8, 8, |i, j| b[(i, j)]);
        let direct = kronecker_solve(&small, &DenseMatrix::identity(8)).unwrap();
        let doubled = doubling_solve(&small, &DenseMatrix::identity(8));
        assert!((&direct - &doubled).max_abs() < 1e-12);
    }

    #[test]
    fn unstable_operator_rejected() {
        let b = DenseMatrix::identity(2).scale(1.01);
        assert!(matches!(
            solve_discrete_lyapunov(&b, &DenseMatrix::identity(2)),
            Err(Error::Instability { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let r = solve_discrete_lyapunov(&DenseMatrix::zeros(2, 2), &DenseMatrix::identity(3));
        assert!(matches!(r, Err(Error::Dimension(_))));
    }
}
