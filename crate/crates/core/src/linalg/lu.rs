use num_complex::Complex64;

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Default floor on the reciprocal condition estimate accepted by [`matrix_inverse`].
pub const DEFAULT_RCOND_FLOOR: f64 = 1e-12;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: DenseMatrix,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
    anorm_one: f64,
}

impl Lu {
    pub fn new(m: &DenseMatrix) -> Result<Self> {
        let n = m.require_square("LU input")?;
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let mut singular = false;
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if pmax == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[(i, j)] -= f * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self {
            n,
            lu,
            perm,
            sign,
            singular,
            anorm_one: m.norm_one(),
        })
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn determinant(&self) -> f64 {
        (0..self.n).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }

    /// Solves `A x = b`.
    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::dim(format!("rhs length {} != {}", b.len(), self.n)));
        }
        if self.singular {
            return Err(Error::Singular { rcond: 0.0 });
        }
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        Ok(x)
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if b.rows() != self.n {
            return Err(Error::dim(format!("rhs rows {} != {}", b.rows(), self.n)));
        }
        let mut out = DenseMatrix::zeros(self.n, b.cols());
        for j in 0..b.cols() {
            let x = self.solve_vec(&b.column(j))?;
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<DenseMatrix> {
        self.solve(&DenseMatrix::identity(self.n))
    }

    /// Reciprocal 1-norm condition number, computed from the explicit inverse.
    pub fn rcond_with_inverse(&self, inv: &DenseMatrix) -> f64 {
        let denom = self.anorm_one * inv.norm_one();
        if denom == 0.0 || !denom.is_finite() {
            0.0
        } else {
            1.0 / denom
        }
    }
}

/// Inverse with a reciprocal-condition floor; see [`DEFAULT_RCOND_FLOOR`].
pub fn matrix_inverse(m: &DenseMatrix) -> Result<DenseMatrix> {
    matrix_inverse_with_floor(m, DEFAULT_RCOND_FLOOR)
}

pub fn matrix_inverse_with_floor(m: &DenseMatrix, rcond_floor: f64) -> Result<DenseMatrix> {
    let lu = Lu::new(m)?;
    if lu.is_singular() {
        return Err(Error::Singular { rcond: 0.0 });
    }
    let inv = lu.inverse()?;
    let rcond = lu.rcond_with_inverse(&inv);
    if !(rcond >= rcond_floor) || !inv.is_finite() {
        return Err(Error::Singular { rcond });
    }
    Ok(inv)
}

pub fn determinant(m: &DenseMatrix) -> Result<f64> {
    Ok(Lu::new(m)?.determinant())
}

/// Dense complex inverse by Gauss-Jordan with partial pivoting. Returns the
/// inverse and the reciprocal 1-norm condition estimate.
pub(crate) fn complex_inverse(a: &[Vec<Complex64>]) -> Option<(Vec<Vec<Complex64>>, f64)> {
    let n = a.len();
    let norm1 = |m: &[Vec<Complex64>]| {
        (0..n)
            .map(|j| (0..n).map(|i| m[i][j].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let anorm = norm1(a);
    let mut m: Vec<Vec<Complex64>> = a.to_vec();
    let mut inv: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        Complex64::new(1.0, 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect()
        })
        .collect();
    for k in 0..n {
        let p = (k..n).max_by(|&x, &y| m[x][k].norm().total_cmp(&m[y][k].norm()))?;
        if m[p][k].norm() == 0.0 {
            return None;
        }
        m.swap(k, p);
        inv.swap(k, p);
        let piv = m[k][k];
        for j in 0..n {
            m[k][j] /= piv;
            inv[k][j] /= piv;
        }
        for i in 0..n {
            if i != k {
                let f = m[i][k];
                if f.norm() != 0.0 {
                    for j in 0..n {
                        let (mk, ik) = (m[k][j], inv[k][j]);
                        m[i][j] -= f * mk;
                        inv[i][j] -= f * ik;
                    }
                }
            }
        }
    }
    let rcond = 1.0 / (anorm * norm1(&inv));
    Some((inv, if rcond.is_finite() { rcond } else { 0.0 }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(m: &DenseMatrix, inv: &DenseMatrix) -> f64 {
        (&(m * inv) - &DenseMatrix::identity(m.rows())).frobenius_norm()
    }

    #[test]
    fn identity_and_diagonal_inverse() {
        let i3 = DenseMatrix::identity(3);
        assert_eq!(matrix_inverse(&i3).unwrap(), i3);
        let d = DenseMatrix::from_diag(&[2.0, 4.0]);
        let inv = matrix_inverse(&d).unwrap();
        assert_eq!(inv, DenseMatrix::from_diag(&[0.5, 0.25]));
    }

    #[test]
    fn random_spd_roundtrip() {
        // M = R R' + I, entries from a fixed deterministic sequence
        let r = DenseMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4);
        let m = &(&r * &r.transpose()) + &DenseMatrix::identity(5);
        let inv = matrix_inverse(&m).unwrap();
        assert!(residual(&m, &inv) <= 1e-8 * 5.0);
    }

    #[test]
    fn singular_is_rejected_with_rcond() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(matrix_inverse(&m), Err(Error::Singular { .. })));
        let nearly = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0 + 1e-15]]).unwrap();
        match matrix_inverse(&nearly) {
            Err(Error::Singular { rcond }) => assert!(rcond < 1e-12),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn determinant_with_pivoting() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        assert!((determinant(&m).unwrap() + 2.0).abs() < 1e-15);
    }

    #[test]
    fn non_square_rejected() {
        assert!(matches!(
            matrix_inverse(&DenseMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }
}
