//! Eigenvalues of general real matrices.
//!
//! Non-symmetric inputs go through Householder reduction to Hessenberg form
//! followed by the Francis double-shift QR iteration; symmetric inputs are
//! tridiagonalized and diagonalized with the implicit QL method. Both follow
//! the public-domain JAMA / EISPACK routines (`orthes`, `hqr2`, `tred2`,
//! `tql2`).

use num_complex::Complex64;

use super::lu::complex_inverse;
use super::DenseMatrix;
use crate::error::{Error, Result};

const EPS: f64 = f64::EPSILON;

/// Matrices with `‖A − A'‖_F` at or below this are treated as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    pub vectors: bool,
    /// QR/QL sweeps allowed per eigenvalue before giving up.
    pub max_sweeps: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            vectors: false,
            max_sweeps: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Sorted by descending modulus, then descending real part, then
    /// descending imaginary part.
    pub eigenvalues: Vec<Complex64>,
    /// `eigenvectors[k]` pairs with `eigenvalues[k]`; unit 2-norm.
    /// `None` unless requested and the matrix is numerically diagonalizable.
    pub eigenvectors: Option<Vec<Vec<Complex64>>>,
}

impl EigenDecomposition {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.norm())
            .fold(0.0, f64::max)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l.re).collect()
    }

    /// `V Λ V⁻¹` as a complex matrix (row-major rows), if eigenvectors exist.
    pub fn reconstruct(&self) -> Option<Vec<Vec<Complex64>>> {
        let vecs = self.eigenvectors.as_ref()?;
        let n = self.n();
        let v: Vec<Vec<Complex64>> = (0..n)
            .map(|i| (0..n).map(|k| vecs[k][i]).collect())
            .collect();
        let (vinv, _) = complex_inverse(&v)?;
        let out = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|k| v[i][k] * self.eigenvalues[k] * vinv[k][j])
                            .sum()
                    })
                    .collect()
            })
            .collect();
        Some(out)
    }
}

pub fn eigen_decompose(m: &DenseMatrix) -> Result<EigenDecomposition> {
    eigen_decompose_with(m, EigenOptions::default())
}

pub fn eigen_decompose_with(m: &DenseMatrix, opts: EigenOptions) -> Result<EigenDecomposition> {
    let n = m.require_square("eigen_decompose input")?;
    if n == 0 {
        return Err(Error::dim("eigen_decompose needs n >= 1"));
    }
    let (values, vectors) = if m.asymmetry() <= SYMMETRY_TOL {
        let (d, v) = symmetric_eigen(&m.symmetrize(), opts.max_sweeps)?;
        let values: Vec<Complex64> = d.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let vectors = opts.vectors.then(|| {
            (0..n)
                .map(|k| (0..n).map(|i| Complex64::new(v[(i, k)], 0.0)).collect())
                .collect()
        });
        (values, vectors)
    } else {
        let mut solver = Hqr::new(m, opts.vectors);
        solver.orthes();
        solver.hqr2(opts.max_sweeps)?;
        let values: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new(solver.d[k], solver.e[k]))
            .collect();
        let vectors = if opts.vectors {
            let vecs = solver.complex_vectors();
            accept_vectors(m, &values, vecs)
        } else {
            None
        };
        (values, vectors)
    };

    let order = sorted_order(&values);
    let eigenvalues = order.iter().map(|&k| values[k]).collect();
    let eigenvectors = vectors.map(|vs| order.iter().map(|&k| vs[k].clone()).collect());
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, in the canonical sort order.
pub fn eigenvalues(m: &DenseMatrix) -> Result<Vec<Complex64>> {
    Ok(eigen_decompose(m)?.eigenvalues)
}

/// Descending modulus; runs of equal modulus (to rounding) ordered by
/// descending real part, then descending imaginary part.
pub fn sort_eigenvalues(values: &mut [Complex64]) {
    let order = sorted_order(values);
    let sorted: Vec<Complex64> = order.iter().map(|&k| values[k]).collect();
    values.copy_from_slice(&sorted);
}

fn sorted_order(values: &[Complex64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].norm().total_cmp(&values[a].norm()));
    let scale = values.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let tol = 1e-10 * scale;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end - 1]].norm() - values[idx[end]].norm() <= tol {
            end += 1;
        }
        idx[start..end].sort_by(|&a, &b| {
            values[b]
                .re
                .total_cmp(&values[a].re)
                .then(values[b].im.total_cmp(&values[a].im))
        });
        start = end;
    }
    idx
}

fn accept_vectors(
    m: &DenseMatrix,
    values: &[Complex64],
    vecs: Vec<Vec<Complex64>>,
) -> Option<Vec<Vec<Complex64>>> {
    let n = values.len();
    let anorm = m.frobenius_norm();
    for (lambda, v) in values.iter().zip(&vecs) {
        let res: f64 = (0..n)
            .map(|i| {
                let av: Complex64 = (0..n).map(|j| v[j] * m[(i, j)]).sum();
                (av - lambda * v[i]).norm_sqr()
            })
            .sum::<f64>()
            .sqrt();
        if res > 1e-8 * anorm.max(f64::MIN_POSITIVE) {
            return None;
        }
    }
    let vmat: Vec<Vec<Complex64>> = (0..n)
        .map(|i| (0..n).map(|k| vecs[k][i]).collect())
        .collect();
    match complex_inverse(&vmat) {
        Some((_, rcond)) if rcond > 1e-10 => Some(vecs),
        _ => None,
    }
}

/// Symmetric eigen-decomposition (tred2 + tql2). Returns eigenvalues
/// ascending and the orthogonal eigenvector matrix (columns).
pub fn symmetric_eigen(m: &DenseMatrix, max_sweeps: usize) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = m.require_square("symmetric_eigen input")?;
    let mut v = m.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e, max_sweeps)?;
    Ok((d, v))
}

fn tred2(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn tql2(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64], max_sweeps: usize) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= EPS * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_sweeps {
                    let partial = d[..l].iter().map(|&x| Complex64::new(x, 0.0)).collect();
                    return Err(Error::Convergence {
                        iterations: iter,
                        found: l,
                        n,
                        partial,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= EPS * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // ascending selection sort, carrying vectors
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for j in 0..n {
                let tmp = v[(j, i)];
                v[(j, i)] = v[(j, k)];
                v[(j, k)] = tmp;
            }
        }
    }
    Ok(())
}

/// Working state for the non-symmetric path.
struct Hqr {
    n: usize,
    h: DenseMatrix,
    v: DenseMatrix,
    d: Vec<f64>,
    e: Vec<f64>,
    ort: Vec<f64>,
    vectors: bool,
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

impl Hqr {
    fn new(m: &DenseMatrix, vectors: bool) -> Self {
        let n = m.rows();
        Self {
            n,
            h: m.clone(),
            v: DenseMatrix::identity(n),
            d: vec![0.0; n],
            e: vec![0.0; n],
            ort: vec![0.0; n],
            vectors,
        }
    }

    fn orthes(&mut self) {
        let n = self.n;
        if n < 3 {
            return;
        }
        let high = n - 1;
        let (h, ort) = (&mut self.h, &mut self.ort);
        for m in 1..high {
            let scale: f64 = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
            if scale == 0.0 {
                continue;
            }
            let mut hh = 0.0;
            for i in (m..=high).rev() {
                ort[i] = h[(i, m - 1)] / scale;
                hh += ort[i] * ort[i];
            }
            let mut g = hh.sqrt();
            if ort[m] > 0.0 {
                g = -g;
            }
            hh -= ort[m] * g;
            ort[m] -= g;

            for j in m..n {
                let mut f = 0.0;
                for i in (m..=high).rev() {
                    f += ort[i] * h[(i, j)];
                }
                f /= hh;
                for i in m..=high {
                    h[(i, j)] -= f * ort[i];
                }
            }
            for i in 0..=high {
                let mut f = 0.0;
                for j in (m..=high).rev() {
                    f += ort[j] * h[(i, j)];
                }
                f /= hh;
                for j in m..=high {
                    h[(i, j)] -= f * ort[j];
                }
            }
            ort[m] *= scale;
            h[(m, m - 1)] = scale * g;
        }

        if !self.vectors {
            return;
        }
        let v = &mut self.v;
        for m in (1..high).rev() {
            if h[(m, m - 1)] != 0.0 {
                for i in m + 1..=high {
                    ort[i] = h[(i, m - 1)];
                }
                for j in m..=high {
                    let mut g = 0.0;
                    for i in m..=high {
                        g += ort[i] * v[(i, j)];
                    }
                    g = (g / ort[m]) / h[(m, m - 1)];
                    for i in m..=high {
                        v[(i, j)] += g * ort[i];
                    }
                }
            }
        }
    }

    #[allow(clippy::many_single_char_names)]
    fn hqr2(&mut self, max_sweeps: usize) -> Result<()> {
        let nn = self.n as isize;
        let want_v = self.vectors;
        let (h, v, d, e) = (&mut self.h, &mut self.v, &mut self.d, &mut self.e);
        let u = |i: isize| i as usize;

        let mut n = nn - 1;
        let low: isize = 0;
        let high = nn - 1;
        let mut exshift = 0.0;
        let (mut p, mut q, mut r, mut s, mut z) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let (mut t, mut w, mut x, mut y);

        let mut norm = 0.0;
        for i in 0..nn {
            for j in (i - 1).max(0)..nn {
                norm += h[(u(i), u(j))].abs();
            }
        }

        let mut iter = 0usize;
        while n >= low {
            let mut l = n;
            while l > low {
                s = h[(u(l - 1), u(l - 1))].abs() + h[(u(l), u(l))].abs();
                if s == 0.0 {
                    s = norm;
                }
                if h[(u(l), u(l - 1))].abs() < EPS * s {
                    break;
                }
                l -= 1;
            }

            if l == n {
                h[(u(n), u(n))] += exshift;
                d[u(n)] = h[(u(n), u(n))];
                e[u(n)] = 0.0;
                n -= 1;
                iter = 0;
            } else if l == n - 1 {
                let (nu, nm) = (u(n), u(n - 1));
                w = h[(nu, nm)] * h[(nm, nu)];
                p = (h[(nm, nm)] - h[(nu, nu)]) / 2.0;
                q = p * p + w;
                z = q.abs().sqrt();
                h[(nu, nu)] += exshift;
                h[(nm, nm)] += exshift;
                x = h[(nu, nu)];

                if q >= 0.0 {
                    z = if p >= 0.0 { p + z } else { p - z };
                    d[nm] = x + z;
                    d[nu] = d[nm];
                    if z != 0.0 {
                        d[nu] = x - w / z;
                    }
                    e[nm] = 0.0;
                    e[nu] = 0.0;
                    x = h[(nu, nm)];
                    s = x.abs() + z.abs();
                    p = x / s;
                    q = z / s;
                    r = (p * p + q * q).sqrt();
                    p /= r;
                    q /= r;

                    for j in nm..u(nn) {
                        z = h[(nm, j)];
                        h[(nm, j)] = q * z + p * h[(nu, j)];
                        h[(nu, j)] = q * h[(nu, j)] - p * z;
                    }
                    for i in 0..=nu {
                        z = h[(i, nm)];
                        h[(i, nm)] = q * z + p * h[(i, nu)];
                        h[(i, nu)] = q * h[(i, nu)] - p * z;
                    }
                    if want_v {
                        for i in u(low)..=u(high) {
                            z = v[(i, nm)];
                            v[(i, nm)] = q * z + p * v[(i, nu)];
                            v[(i, nu)] = q * v[(i, nu)] - p * z;
                        }
                    }
                } else {
                    d[nm] = x + p;
                    d[nu] = x + p;
                    e[nm] = z;
                    e[nu] = -z;
                }
                n -= 2;
                iter = 0;
            } else {
                x = h[(u(n), u(n))];
                y = 0.0;
                w = 0.0;
                if l < n {
                    y = h[(u(n - 1), u(n - 1))];
                    w = h[(u(n), u(n - 1))] * h[(u(n - 1), u(n))];
                }

                // Wilkinson's exceptional shift
                if iter == 10 {
                    exshift += x;
                    for i in low..=n {
                        h[(u(i), u(i))] -= x;
                    }
                    s = h[(u(n), u(n - 1))].abs() + h[(u(n - 1), u(n - 2))].abs();
                    x = 0.75 * s;
                    y = x;
                    w = -0.4375 * s * s;
                }

                // MATLAB's exceptional shift
                if iter == 30 {
                    s = (y - x) / 2.0;
                    s = s * s + w;
                    if s > 0.0 {
                        s = s.sqrt();
                        if y < x {
                            s = -s;
                        }
                        s = x - w / ((y - x) / 2.0 + s);
                        for i in low..=n {
                            h[(u(i), u(i))] -= s;
                        }
                        exshift += s;
                        x = 0.964;
                        y = x;
                        w = x;
                    }
                }

                iter += 1;
                if iter > max_sweeps {
                    let found = u(nn - 1 - n);
                    let partial = (u(n + 1)..u(nn))
                        .map(|k| Complex64::new(d[k], e[k]))
                        .collect();
                    return Err(Error::Convergence {
                        iterations: iter,
                        found,
                        n: u(nn),
                        partial,
                    });
                }

                let mut m = n - 2;
                while m >= l {
                    let mu = u(m);
                    z = h[(mu, mu)];
                    r = x - z;
                    s = y - z;
                    p = (r * s - w) / h[(mu + 1, mu)] + h[(mu, mu + 1)];
                    q = h[(mu + 1, mu + 1)] - z - r - s;
                    r = h[(mu + 2, mu + 1)];
                    s = p.abs() + q.abs() + r.abs();
                    p /= s;
                    q /= s;
                    r /= s;
                    if m == l {
                        break;
                    }
                    if h[(mu, mu - 1)].abs() * (q.abs() + r.abs())
                        < EPS
                            * (p.abs()
                                * (h[(mu - 1, mu - 1)].abs() + z.abs() + h[(mu + 1, mu + 1)].abs()))
                    {
                        break;
                    }
                    m -= 1;
                }

                for i in m + 2..=n {
                    h[(u(i), u(i - 2))] = 0.0;
                    if i > m + 2 {
                        h[(u(i), u(i - 3))] = 0.0;
                    }
                }

                // double QR step on rows l..=n, columns m..=n
                let mut k = m;
                while k < n {
                    let ku = u(k);
                    let notlast = k != n - 1;
                    if k != m {
                        p = h[(ku, ku - 1)];
                        q = h[(ku + 1, ku - 1)];
                        r = if notlast { h[(ku + 2, ku - 1)] } else { 0.0 };
                        x = p.abs() + q.abs() + r.abs();
                        if x == 0.0 {
                            k += 1;
                            continue;
                        }
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                    s = (p * p + q * q + r * r).sqrt();
                    if p < 0.0 {
                        s = -s;
                    }
                    if s != 0.0 {
                        if k != m {
                            h[(ku, ku - 1)] = -s * x;
                        } else if l != m {
                            h[(ku, ku - 1)] = -h[(ku, ku - 1)];
                        }
                        p += s;
                        x = p / s;
                        y = q / s;
                        z = r / s;
                        q /= p;
                        r /= p;

                        for j in ku..u(nn) {
                            p = h[(ku, j)] + q * h[(ku + 1, j)];
                            if notlast {
                                p += r * h[(ku + 2, j)];
                                h[(ku + 2, j)] -= p * z;
                            }
                            h[(ku, j)] -= p * x;
                            h[(ku + 1, j)] -= p * y;
                        }
                        for i in 0..=u(n.min(k + 3)) {
                            p = x * h[(i, ku)] + y * h[(i, ku + 1)];
                            if notlast {
                                p += z * h[(i, ku + 2)];
                                h[(i, ku + 2)] -= p * r;
                            }
                            h[(i, ku)] -= p;
                            h[(i, ku + 1)] -= p * q;
                        }
                        if want_v {
                            for i in u(low)..=u(high) {
                                p = x * v[(i, ku)] + y * v[(i, ku + 1)];
                                if notlast {
                                    p += z * v[(i, ku + 2)];
                                    v[(i, ku + 2)] -= p * r;
                                }
                                v[(i, ku)] -= p;
                                v[(i, ku + 1)] -= p * q;
                            }
                        }
                    }
                    k += 1;
                }
            }
        }

        if !want_v || norm == 0.0 {
            return Ok(());
        }

        // back-substitute for the vectors of the quasi-triangular form
        for n in (0..nn).rev() {
            let nu = u(n);
            p = d[nu];
            q = e[nu];
            if q == 0.0 {
                let mut l = n;
                h[(nu, nu)] = 1.0;
                for i in (0..n).rev() {
                    let iu = u(i);
                    w = h[(iu, iu)] - p;
                    r = 0.0;
                    for j in l..=n {
                        r += h[(iu, u(j))] * h[(u(j), nu)];
                    }
                    if e[iu] < 0.0 {
                        z = w;
                        s = r;
                    } else {
                        l = i;
                        if e[iu] == 0.0 {
                            h[(iu, nu)] = if w != 0.0 { -r / w } else { -r / (EPS * norm) };
                        } else {
                            x = h[(iu, iu + 1)];
                            y = h[(iu + 1, iu)];
                            q = (d[iu] - p) * (d[iu] - p) + e[iu] * e[iu];
                            t = (x * s - z * r) / q;
                            h[(iu, nu)] = t;
                            h[(iu + 1, nu)] = if x.abs() > z.abs() {
                                (-r - w * t) / x
                            } else {
                                (-s - y * t) / z
                            };
                        }
                        t = h[(iu, nu)].abs();
                        if (EPS * t) * t > 1.0 {
                            for j in iu..=nu {
                                h[(j, nu)] /= t;
                            }
                        }
                    }
                }
            } else if q < 0.0 {
                let nm = nu - 1;
                let mut l = n - 1;
                if h[(nu, nm)].abs() > h[(nm, nu)].abs() {
                    h[(nm, nm)] = q / h[(nu, nm)];
                    h[(nm, nu)] = -(h[(nu, nu)] - p) / h[(nu, nm)];
                } else {
                    let (cr, ci) = cdiv(0.0, -h[(nm, nu)], h[(nm, nm)] - p, q);
                    h[(nm, nm)] = cr;
                    h[(nm, nu)] = ci;
                }
                h[(nu, nm)] = 0.0;
                h[(nu, nu)] = 1.0;
                for i in (0..n - 1).rev() {
                    let iu = u(i);
                    let mut ra = 0.0;
                    let mut sa = 0.0;
                    for j in l..=n {
                        ra += h[(iu, u(j))] * h[(u(j), nm)];
                        sa += h[(iu, u(j))] * h[(u(j), nu)];
                    }
                    w = h[(iu, iu)] - p;
                    if e[iu] < 0.0 {
                        z = w;
                        r = ra;
                        s = sa;
                    } else {
                        l = i;
                        if e[iu] == 0.0 {
                            let (cr, ci) = cdiv(-ra, -sa, w, q);
                            h[(iu, nm)] = cr;
                            h[(iu, nu)] = ci;
                        } else {
                            x = h[(iu, iu + 1)];
                            y = h[(iu + 1, iu)];
                            let mut vr = (d[iu] - p) * (d[iu] - p) + e[iu] * e[iu] - q * q;
                            let vi = (d[iu] - p) * 2.0 * q;
                            if vr == 0.0 && vi == 0.0 {
                                vr = EPS * norm * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                            }
                            let (cr, ci) =
                                cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                            h[(iu, nm)] = cr;
                            h[(iu, nu)] = ci;
                            if x.abs() > z.abs() + q.abs() {
                                h[(iu + 1, nm)] = (-ra - w * h[(iu, nm)] + q * h[(iu, nu)]) / x;
                                h[(iu + 1, nu)] = (-sa - w * h[(iu, nu)] - q * h[(iu, nm)]) / x;
                            } else {
                                let (cr, ci) =
                                    cdiv(-r - y * h[(iu, nm)], -s - y * h[(iu, nu)], z, q);
                                h[(iu + 1, nm)] = cr;
                                h[(iu + 1, nu)] = ci;
                            }
                        }
                        t = h[(iu, nm)].abs().max(h[(iu, nu)].abs());
                        if (EPS * t) * t > 1.0 {
                            for j in iu..=nu {
                                h[(j, nm)] /= t;
                                h[(j, nu)] /= t;
                            }
                        }
                    }
                }
            }
        }

        // back-transform to vectors of the original matrix
        for j in (u(low)..u(nn)).rev() {
            for i in u(low)..=u(high) {
                z = 0.0;
                for k in u(low)..=j.min(u(high)) {
                    z += v[(i, k)] * h[(k, j)];
                }
                v[(i, j)] = z;
            }
        }
        Ok(())
    }

    fn complex_vectors(&self) -> Vec<Vec<Complex64>> {
        let n = self.n;
        let mut out = Vec::with_capacity(n);
        let mut k = 0;
        while k < n {
            if self.e[k] == 0.0 || k + 1 == n {
                out.push(normalize(
                    (0..n)
                        .map(|i| Complex64::new(self.v[(i, k)], 0.0))
                        .collect(),
                ));
                k += 1;
            } else {
                let vec: Vec<Complex64> = (0..n)
                    .map(|i| Complex64::new(self.v[(i, k)], self.v[(i, k + 1)]))
                    .collect();
                let vec = normalize(vec);
                let conj = vec.iter().map(|c| c.conj()).collect();
                out.push(vec);
                out.push(conj);
                k += 2;
            }
        }
        out
    }
}

fn normalize(v: Vec<Complex64>) -> Vec<Complex64> {
    let nrm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if nrm == 0.0 {
        v
    } else {
        v.into_iter().map(|c| c / nrm).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::lu::determinant;

    fn close(a: Complex64, re: f64, im: f64, tol: f64) -> bool {
        (a.re - re).abs() <= tol && (a.im - im).abs() <= tol
    }

    #[test]
    fn identity_eigenvalues() {
        let ev = eigenvalues(&DenseMatrix::identity(3)).unwrap();
        assert_eq!(ev.len(), 3);
        assert!(ev.iter().all(|l| close(*l, 1.0, 0.0, 1e-14)));
    }

    #[test]
    fn off_diagonal_half() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let ev = eigenvalues(&m).unwrap();
        assert!(close(ev[0], 0.5, 0.0, 1e-14));
        assert!(close(ev[1], -0.5, 0.0, 1e-14));
    }

    #[test]
    fn rotation_gives_conjugate_pair_sorted_by_imag() {
        let m = DenseMatrix::from_rows(&[vec![0.0, -2.0], vec![2.0, 0.0]])
            .unwrap()
            .scale(0.5);
        let ev = eigenvalues(&m).unwrap();
        assert!(close(ev[0], 0.0, 1.0, 1e-14));
        assert!(close(ev[1], 0.0, -1.0, 1e-14));
    }

    #[test]
    fn product_of_eigenvalues_equals_lu_determinant() {
        let m = DenseMatrix::from_fn(5, 5, |i, j| {
            (((i * 13 + j * 7) % 17) as f64 / 17.0 - 0.5) * 0.6
        });
        let ev = eigenvalues(&m).unwrap();
        let prod: Complex64 = ev.iter().product();
        let det = determinant(&m).unwrap();
        assert!((prod.re - det).abs() <= 1e-8, "{prod} vs {det}");
        assert!(prod.im.abs() <= 1e-8);
    }

    #[test]
    fn eigenvectors_satisfy_residual_bound() {
        let m = DenseMatrix::from_rows(&[
            vec![0.2, 0.5, 0.0, 0.1],
            vec![-0.4, 0.1, 0.3, 0.0],
            vec![0.0, 0.2, -0.3, 0.6],
            vec![0.7, 0.0, 0.1, 0.05],
        ])
        .unwrap();
        let eig = eigen_decompose_with(
            &m,
            EigenOptions {
                vectors: true,
                ..Default::default()
            },
        )
        .unwrap();
        let vecs = eig.eigenvectors.as_ref().expect("diagonalizable");
        let anorm = m.frobenius_norm();
        for (lambda, v) in eig.eigenvalues.iter().zip(vecs) {
            let res: f64 = (0..4)
                .map(|i| {
                    let av: Complex64 = (0..4).map(|j| v[j] * m[(i, j)]).sum();
                    (av - lambda * v[i]).norm_sqr()
                })
                .sum::<f64>()
                .sqrt();
            assert!(res <= 1e-8 * anorm);
        }
        let rec = eig.reconstruct().unwrap();
        let err: f64 = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .map(|(i, j)| (rec[i][j] - m[(i, j)]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-7 * anorm);
    }

    #[test]
    fn defective_matrix_has_no_vectors() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        let eig = eigen_decompose_with(
            &m,
            EigenOptions {
                vectors: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(eig.eigenvalues.iter().all(|l| l.norm() < 1e-12));
        assert!(eig.eigenvectors.is_none());
    }

    #[test]
    fn non_square_is_dimension_error() {
        assert!(matches!(
            eigenvalues(&DenseMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn convergence_failure_reports_partial() {
        let m = DenseMatrix::from_fn(6, 6, |i, j| ((i * 5 + j * 3) % 7) as f64 - 3.0);
        let err = eigen_decompose_with(
            &m,
            EigenOptions {
                vectors: false,
                max_sweeps: 0,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Convergence { n: 6, .. }));
    }

    #[test]
    fn one_by_one() {
        let m = DenseMatrix::from_rows(&[vec![-3.5]]).unwrap();
        let eig = eigen_decompose_with(
            &m,
            EigenOptions {
                vectors: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(eig.eigenvalues, vec![Complex64::new(-3.5, 0.0)]);
        assert!(eig.eigenvectors.is_some());
    }
}
