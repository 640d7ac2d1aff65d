//! Moment-based estimation of the interaction matrix.
//!
//! Everything is built on the restriction `Γ₁ = [(1−δ)I + A D_f] Γ₀`, whose
//! sample residual `M̂(A) = Γ̂₁ − [(1−δ)I + A D_f] Γ̂₀` is linear in `A`.
//! Writing `R = Γ̂₁ − (1−δ)Γ̂₀` and `X = D_f Γ̂₀` it reads `M̂(A) = R − A X`.

use serde::Serialize;

use crate::dynamics::{AggregateShock, SimPath};
use crate::error::{Error, Result};
use crate::linalg::eigen::symmetric_eigen;
use crate::linalg::{matrix_inverse, DenseMatrix, Lu};

/// Entries with magnitude at or below this count as zero in support reports.
pub const SUPPORT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub gamma0: DenseMatrix,
    pub gamma1: DenseMatrix,
    /// Number of periods behind `gamma0`; zero for population moments.
    pub t_eff: usize,
}

impl MomentSet {
    pub fn population(gamma0: DenseMatrix, gamma1: DenseMatrix) -> Result<Self> {
        let n = gamma0.require_square("Gamma0")?;
        if gamma1.rows() != n || gamma1.cols() != n {
            return Err(Error::dim("Gamma0 and Gamma1 differ in shape"));
        }
        Ok(Self {
            gamma0: gamma0.symmetrize(),
            gamma1,
            t_eff: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.gamma0.rows()
    }
}

/// Removes the footprint of a deterministic aggregate shock by regressing
/// every coordinate on the shock's per-period regressors.
pub fn remove_aggregate_shock(path: &SimPath, shock: &AggregateShock) -> Result<SimPath> {
    let t_len = path.len();
    let regs: Vec<Vec<f64>> = (0..t_len)
        .map(|t| shock.regressors(path.offset + t))
        .collect();
    let k = regs[0].len();
    if k == 0 {
        return Ok(path.clone());
    }
    let xtx = DenseMatrix::from_fn(k, k, |a, b| regs.iter().map(|r| r[a] * r[b]).sum());
    let lu = Lu::new(&xtx)?;
    let mut out = path.states.clone();
    for j in 0..path.n() {
        let xty: Vec<f64> = (0..k)
            .map(|a| (0..t_len).map(|t| regs[t][a] * path.states[(t, j)]).sum())
            .collect();
        let beta = lu.solve_vec(&xty)?;
        for t in 0..t_len {
            let fit: f64 = regs[t].iter().zip(&beta).map(|(r, b)| r * b).sum();
            out[(t, j)] -= fit;
        }
    }
    Ok(SimPath {
        states: out,
        ..path.clone()
    })
}

/// `Γ̂₀ = (1/T) Σ z_t z_t'` (symmetrized) and
/// `Γ̂₁ = (1/(T−1)) Σ_{t<T} z_{t+1} z_t'`, after removing the aggregate shock.
pub fn sample_moments(path: &SimPath, shock: &AggregateShock) -> Result<MomentSet> {
    if path.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "moments need T >= 2, got {}",
            path.len()
        )));
    }
    let clean;
    let p = if matches!(shock, AggregateShock::None) {
        path
    } else {
        clean = remove_aggregate_shock(path, shock)?;
        &clean
    };
    let (t_len, n) = (p.len(), p.n());
    let mut g0 = vec![0.0; n * n];
    let mut g1 = vec![0.0; n * n];
    for t in 0..t_len {
        let z = p.state(t);
        for i in 0..n {
            let zi = z[i];
            let row = &mut g0[i * n..(i + 1) * n];
            for (g, zj) in row.iter_mut().zip(z) {
                *g += zi * zj;
            }
        }
        if t + 1 < t_len {
            let next = p.state(t + 1);
            for i in 0..n {
                let zi = next[i];
                let row = &mut g1[i * n..(i + 1) * n];
                for (g, zj) in row.iter_mut().zip(z) {
                    *g += zi * zj;
                }
            }
        }
    }
    let t0 = t_len as f64;
    let t1 = (t_len - 1) as f64;
    g0.iter_mut().for_each(|g| *g /= t0);
    g1.iter_mut().for_each(|g| *g /= t1);
    Ok(MomentSet {
        gamma0: DenseMatrix::from_raw(n, n, g0).symmetrize(),
        gamma1: DenseMatrix::from_raw(n, n, g1),
        t_eff: t_len,
    })
}

fn check_conformable(a: Option<&DenseMatrix>, d_f: &DenseMatrix, m: &MomentSet) -> Result<usize> {
    let n = m.n();
    if d_f.rows() != n || d_f.cols() != n {
        return Err(Error::dim(format!(
            "D_f is {}x{}, moments are {n}x{n}",
            d_f.rows(),
            d_f.cols()
        )));
    }
    if let Some(a) = a {
        if a.rows() != n || a.cols() != n {
            return Err(Error::dim(format!(
                "A is {}x{}, moments are {n}x{n}",
                a.rows(),
                a.cols()
            )));
        }
    }
    Ok(n)
}

/// `R = Γ̂₁ − (1−δ)Γ̂₀`.
fn residual_target(m: &MomentSet, delta: f64) -> DenseMatrix {
    &m.gamma1 - &m.gamma0.scale(1.0 - delta)
}

/// `M̂(A) = Γ̂₁ − [(1−δ)I + A D_f] Γ̂₀`.
pub fn moment_function(
    a: &DenseMatrix,
    delta: f64,
    d_f: &DenseMatrix,
    m: &MomentSet,
) -> Result<DenseMatrix> {
    check_conformable(Some(a), d_f, m)?;
    let ad = a.matmul(d_f)?;
    let b_g0 = &ad.matmul(&m.gamma0)? + &m.gamma0.scale(1.0 - delta);
    Ok(&m.gamma1 - &b_g0)
}

/// Identity-weighted objective `‖M̂(A)‖_F²`.
pub fn objective(a: &DenseMatrix, delta: f64, d_f: &DenseMatrix, m: &MomentSet) -> Result<f64> {
    Ok(moment_function(a, delta, d_f, m)?.frobenius_norm().powi(2))
}

/// `vec(M̂)' W vec(M̂)` with column-major `vec`.
pub fn weighted_objective(
    a: &DenseMatrix,
    delta: f64,
    d_f: &DenseMatrix,
    m: &MomentSet,
    w: &DenseMatrix,
) -> Result<f64> {
    let v = moment_function(a, delta, d_f, m)?.vec();
    if w.rows() != v.len() || w.cols() != v.len() {
        return Err(Error::dim(format!(
            "weighting matrix must be {0}x{0}",
            v.len()
        )));
    }
    let wv = w.mul_vec(&v);
    Ok(v.iter().zip(&wv).map(|(a, b)| a * b).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Closed,
    Gmm { two_step: bool },
    Lasso { lambda: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Closed => "closed",
            Method::Gmm { .. } => "gmm",
            Method::Lasso { .. } => "lasso",
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            Method::Lasso { lambda } => Some(*lambda),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub a_hat: DenseMatrix,
    /// Value of the criterion the method minimizes (weighted for GMM,
    /// penalized for the lasso).
    pub objective: f64,
    /// Sampling variance of `vec(Â)` (column-major), when computed.
    pub variance: Option<DenseMatrix>,
    pub method: Method,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the GMM normal equations were singular and the
    /// minimum-norm solution was returned.
    pub rank_deficient: bool,
}

impl EstimateResult {
    pub fn nonzero_count(&self) -> usize {
        self.a_hat.count_nonzero(SUPPORT_TOL)
    }
}

/// Exact minimizer of `‖M̂(A)‖_F²`: `Â = (Γ̂₁Γ̂₀⁻¹ − (1−δ)I) D_f⁻¹`.
pub fn estimate_closed_form(
    m: &MomentSet,
    delta: f64,
    d_f: &DenseMatrix,
) -> Result<EstimateResult> {
    let n = check_conformable(None, d_f, m)?;
    let g0_inv = matrix_inverse(&m.gamma0)?;
    let d_inv = matrix_inverse(d_f)?;
    let mut core = m.gamma1.matmul(&g0_inv)?;
    for i in 0..n {
        core[(i, i)] -= 1.0 - delta;
    }
    let a_hat = core.matmul(&d_inv)?;
    let objective = objective(&a_hat, delta, d_f, m)?;
    Ok(EstimateResult {
        a_hat,
        objective,
        variance: None,
        method: Method::Closed,
        iterations: 0,
        converged: true,
        rank_deficient: false,
    })
}

/// Stacked linear system: `vec(M̂(A)) = c − G a` with `c = vec(R)`,
/// `G = X' ⊗ I`, `a = vec(A)`.
fn stacked_design(m: &MomentSet, delta: f64, d_f: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>)> {
    let n = m.n();
    let x = d_f.matmul(&m.gamma0)?;
    let g = x.transpose().kron(&DenseMatrix::identity(n));
    Ok((g, residual_target(m, delta).vec()))
}

/// Solves the symmetric PSD system `H a = b`. Falls back to the
/// eigen-pseudo-inverse (minimum-norm solution) when `H` is numerically
/// singular; the flag reports which route was taken.
fn solve_normal_equations(h: &DenseMatrix, b: &[f64]) -> Result<(Vec<f64>, bool)> {
    if let Ok(inv) = crate::linalg::matrix_inverse_with_floor(h, 1e-12) {
        return Ok((inv.mul_vec(b), false));
    }
    let (d, v) = symmetric_eigen(&h.symmetrize(), 500)?;
    let dmax = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let cut = dmax * 1e-12 * d.len() as f64;
    let k = d.len();
    let vtb: Vec<f64> = (0..k)
        .map(|j| (0..k).map(|i| v[(i, j)] * b[i]).sum())
        .collect();
    let mut x = vec![0.0; k];
    for j in 0..k {
        if d[j] > cut {
            let c = vtb[j] / d[j];
            for i in 0..k {
                x[i] += v[(i, j)] * c;
            }
        }
    }
    Ok((x, true))
}

/// Minimizes `vec(M̂)' W vec(M̂)`. The problem is linear in `vec(A)`, so
/// this is weighted least squares: `a = (G'WG)⁻¹ G'W c`.
pub fn estimate_gmm(
    m: &MomentSet,
    delta: f64,
    d_f: &DenseMatrix,
    w: &DenseMatrix,
) -> Result<EstimateResult> {
    let n = check_conformable(None, d_f, m)?;
    let nn = n * n;
    if w.rows() != nn || w.cols() != nn {
        return Err(Error::dim(format!("weighting matrix must be {nn}x{nn}")));
    }
    if !w.is_symmetric(1e-10 * (1.0 + w.max_abs())) {
        return Err(Error::InvalidArgument(
            "weighting matrix must be symmetric".into(),
        ));
    }
    let (g, c) = stacked_design(m, delta, d_f)?;
    let gt_w = g.transpose().matmul(w)?;
    let h = gt_w.matmul(&g)?;
    let rhs = gt_w.mul_vec(&c);
    let (a, rank_deficient) = solve_normal_equations(&h, &rhs)?;
    let a_hat = DenseMatrix::from_vec(n, n, &a);
    let objective = weighted_objective(&a_hat, delta, d_f, m, w)?;
    Ok(EstimateResult {
        a_hat,
        objective,
        variance: None,
        method: Method::Gmm { two_step: false },
        iterations: 1,
        converged: true,
        rank_deficient,
    })
}

/// Per-period moment contributions `g_t = vec(z_{t+1}z_t' − B z_t z_t')`
/// for `t = 1..T−1`, as rows.
fn moment_contributions(
    states: &DenseMatrix,
    a: &DenseMatrix,
    delta: f64,
    d_f: &DenseMatrix,
) -> Result<Vec<Vec<f64>>> {
    let n = states.cols();
    let mut b = a.matmul(d_f)?;
    for i in 0..n {
        b[(i, i)] += 1.0 - delta;
    }
    let mut out = Vec::with_capacity(states.rows().saturating_sub(1));
    for t in 0..states.rows() - 1 {
        let z = states.row(t);
        let bz = b.mul_vec(z);
        let e: Vec<f64> = states
            .row(t + 1)
            .iter()
            .zip(&bz)
            .map(|(x, y)| x - y)
            .collect();
        // vec(e z') column-major: entry (i, j) at j*n + i
        let mut g = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                g[j * n + i] = e[i] * z[j];
            }
        }
        out.push(g);
    }
    Ok(out)
}

/// `Ŝ = (1/T') Σ g_t g_t'`, with Bartlett-weighted autocovariances up to `lag`.
fn long_run_covariance(g: &[Vec<f64>], lag: usize) -> DenseMatrix {
    let k = g[0].len();
    let t = g.len() as f64;
    let mut s = DenseMatrix::zeros(k, k);
    let add_cross = |s: &mut DenseMatrix, l: usize, weight: f64| {
        for t_idx in l..g.len() {
            let (x, y) = (&g[t_idx], &g[t_idx - l]);
            for i in 0..k {
                let xi = x[i] * weight / t;
                if xi == 0.0 {
                    continue;
                }
                let row = s.row_mut(i);
                for (r, yj) in row.iter_mut().zip(y) {
                    *r += xi * yj;
                }
            }
        }
    };
    add_cross(&mut s, 0, 1.0);
    for l in 1..=lag.min(g.len().saturating_sub(1)) {
        let mut cross = DenseMatrix::zeros(k, k);
        add_cross(&mut cross, l, 1.0 - l as f64 / (lag as f64 + 1.0));
        s = &s + &(&cross + &cross.transpose());
    }
    s.symmetrize()
}

#[derive(Debug, Clone, Copy)]
pub struct VarianceOptions {
    /// Bartlett lag for `Ŝ`; zero under serially independent shocks.
    pub lag: usize,
}

impl Default for VarianceOptions {
    fn default() -> Self {
        Self { lag: 0 }
    }
}

/// Sandwich variance of `vec(Â)`:
/// `(G'WG)⁻¹ G'WŜWG (G'WG)⁻¹ / T'`, with `G = −(Γ̂₀D_f') ⊗ I` and `T'` the
/// number of moment contributions. `W = None` means identity weighting.
/// The path should already be free of aggregate shocks.
pub fn asymptotic_variance(
    path: &SimPath,
    a_hat: &DenseMatrix,
    delta: f64,
    d_f: &DenseMatrix,
    w: Option<&DenseMatrix>,
    opts: VarianceOptions,
) -> Result<DenseMatrix> {
    let n = path.n();
    if path.len() < 3 {
        return Err(Error::InsufficientData("variance needs T >= 3".into()));
    }
    if a_hat.rows() != n || a_hat.cols() != n || !a_hat.is_finite() {
        return Err(Error::dim("A_hat must be a finite n x n matrix"));
    }
    let m = sample_moments(path, &AggregateShock::None)?;
    check_conformable(None, d_f, &m)?;
    let g = m
        .gamma0
        .matmul(&d_f.transpose())?
        .kron(&DenseMatrix::identity(n))
        .scale(-1.0);
    let contributions = moment_contributions(&path.states, a_hat, delta, d_f)?;
    let s = long_run_covariance(&contributions, opts.lag);
    let nn = n * n;
    let (gt_w, wg) = match w {
        Some(w) => {
            if w.rows() != nn || w.cols() != nn {
                return Err(Error::dim(format!("weighting matrix must be {nn}x{nn}")));
            }
            (g.transpose().matmul(w)?, w.matmul(&g)?)
        }
        None => (g.transpose(), g.clone()),
    };
    let bread = gt_w.matmul(&g)?;
    let bread_inv = matrix_inverse(&bread).map_err(|e| match e {
        Error::Singular { rcond } => Error::DegenerateInformation(format!(
            "G'WG is singular (rcond {rcond:e}); the path carries no information"
        )),
        other => other,
    })?;
    let meat = gt_w.matmul(&s)?.matmul(&wg)?;
    let v = bread_inv.matmul(&meat)?.matmul(&bread_inv)?;
    Ok(v.scale(1.0 / contributions.len() as f64).symmetrize())
}

/// Two-step GMM: identity-weighted first step, then `W = (Ŝ + rI)⁻¹` with
/// ridge `r = 1e-8·tr(Ŝ)/n²`. The variance is filled in.
pub fn estimate_gmm_two_step(
    path: &SimPath,
    shock: &AggregateShock,
    delta: f64,
    d_f: &DenseMatrix,
) -> Result<EstimateResult> {
    let clean = remove_aggregate_shock(path, shock)?;
    let m = sample_moments(&clean, &AggregateShock::None)?;
    let n = m.n();
    let first = estimate_gmm(&m, delta, d_f, &DenseMatrix::identity(n * n))?;
    let g = moment_contributions(&clean.states, &first.a_hat, delta, d_f)?;
    let s = long_run_covariance(&g, 0);
    let w = ridge_inverse(&s)?;
    let mut second = estimate_gmm(&m, delta, d_f, &w)?;
    second.method = Method::Gmm { two_step: true };
    second.iterations = 2;
    second.variance = asymptotic_variance(
        &clean,
        &second.a_hat,
        delta,
        d_f,
        Some(&w),
        VarianceOptions::default(),
    )
    .ok();
    Ok(second)
}

/// Optimal weighting for a given `Ŝ`.
pub fn ridge_inverse(s: &DenseMatrix) -> Result<DenseMatrix> {
    let k = s.require_square("S")?;
    let ridge = 1e-8 * s.trace() / k as f64;
    let (d, v) = symmetric_eigen(&s.symmetrize(), 500)?;
    let floor = ridge.max(f64::MIN_POSITIVE);
    let scaled = DenseMatrix::from_fn(k, k, |i, j| v[(i, j)] / (d[j].max(0.0) + floor));
    Ok(scaled.matmul_unchecked(&v.transpose()).symmetrize())
}

#[derive(Debug, Clone, Copy)]
pub struct LassoOptions {
    pub max_iter: usize,
    /// Relative objective change that ends the iteration.
    pub tol: f64,
    /// FISTA momentum.
    pub accelerate: bool,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: 1e-9,
            accelerate: false,
        }
    }
}

/// Pieces of the smooth loss `‖R − AX‖_F²`.
struct LassoProblem {
    n: usize,
    r: DenseMatrix,
    x: DenseMatrix,
    xt: DenseMatrix,
    rx: DenseMatrix,
    xx: DenseMatrix,
}

impl LassoProblem {
    fn new(m: &MomentSet, delta: f64, d_f: &DenseMatrix) -> Result<Self> {
        let n = check_conformable(None, d_f, m)?;
        let r = residual_target(m, delta);
        let x = d_f.matmul(&m.gamma0)?;
        let xt = x.transpose();
        Ok(Self {
            n,
            rx: r.matmul(&xt)?,
            xx: x.matmul(&xt)?,
            r,
            x,
            xt,
        })
    }

    fn residual(&self, a: &DenseMatrix) -> DenseMatrix {
        &self.r - &a.matmul_unchecked(&self.x)
    }

    // Evaluated from the residual itself: the expanded quadratic form
    // cancels catastrophically near an exact fit and stalls the stopping rule.
    fn loss(&self, a: &DenseMatrix) -> f64 {
        self.residual(a).as_slice().iter().map(|e| e * e).sum()
    }

    /// `∇ = −2(R − AX)X'`.
    fn gradient(&self, a: &DenseMatrix) -> DenseMatrix {
        self.residual(a).matmul_unchecked(&self.xt).scale(-2.0)
    }
}

fn l1(a: &DenseMatrix) -> f64 {
    a.as_slice().iter().map(|x| x.abs()).sum()
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Smallest λ at which `Â = 0`: `‖∇f(0)‖∞ = 2‖RX'‖∞`.
pub fn lasso_lambda_max(m: &MomentSet, delta: f64, d_f: &DenseMatrix) -> Result<f64> {
    Ok(2.0 * LassoProblem::new(m, delta, d_f)?.rx.max_abs())
}

pub fn estimate_lasso(
    m: &MomentSet,
    delta: f64,
    d_f: &DenseMatrix,
    lambda: f64,
    opts: LassoOptions,
) -> Result<EstimateResult> {
    let prob = LassoProblem::new(m, delta, d_f)?;
    let start = DenseMatrix::zeros(prob.n, prob.n);
    lasso_from(&prob, lambda, opts, start)
}

fn lasso_from(
    prob: &LassoProblem,
    lambda: f64,
    opts: LassoOptions,
    start: DenseMatrix,
) -> Result<EstimateResult> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let n = prob.n;
    // optimistic first step 1/(2·mean eigenvalue of XX'); backtracking shrinks it
    let mean_eig = prob.xx.trace() / n as f64;
    let mut step = if mean_eig > 0.0 {
        1.0 / (2.0 * mean_eig)
    } else {
        1.0
    };

    let mut a = start;
    let mut y = a.clone();
    let mut momentum = 1.0f64;
    let mut f_prev = prob.loss(&a) + lambda * l1(&a);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let base = if opts.accelerate { &y } else { &a };
        let fy = prob.loss(base);
        let grad = prob.gradient(base);
        let next = loop {
            let cand = DenseMatrix::from_fn(n, n, |i, j| {
                soft_threshold(base[(i, j)] - step * grad[(i, j)], step * lambda)
            });
            let diff = &cand - base;
            let lin: f64 = diff
                .as_slice()
                .iter()
                .zip(grad.as_slice())
                .map(|(d, g)| d * g)
                .sum();
            let quad = diff.frobenius_norm().powi(2) / (2.0 * step);
            if prob.loss(&cand) <= fy + lin + quad + 1e-15 * (1.0 + fy) || step < 1e-300 {
                break cand;
            }
            step *= 0.5;
        };

        let f_next = prob.loss(&next) + lambda * l1(&next);
        let moved = (&next - &a).frobenius_norm();
        if opts.accelerate {
            let t_next = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
            let beta = (momentum - 1.0) / t_next;
            y = &next + &(&next - &a).scale(beta);
            momentum = t_next;
            // restart momentum when the objective goes up
            if f_next > f_prev {
                y = next.clone();
                momentum = 1.0;
            }
        }
        a = next;
        let change = (f_prev - f_next).abs();
        // the second clause catches a floating-point stall, e.g. when the
        // penalized minimum is exactly zero and relative change never settles
        if change <= opts.tol * f_prev.abs() || moved <= 1e-15 * (1.0 + a.frobenius_norm()) {
            converged = true;
            f_prev = f_next;
            break;
        }
        f_prev = f_next;
    }

    Ok(EstimateResult {
        objective: f_prev,
        a_hat: a,
        variance: None,
        method: Method::Lasso { lambda },
        iterations,
        converged,
        rank_deficient: false,
    })
}

/// Lasso along a descending λ grid, each fit warm-started from the previous.
pub fn regularization_path(
    m: &MomentSet,
    delta: f64,
    d_f: &DenseMatrix,
    lambdas: &[f64],
    opts: LassoOptions,
) -> Result<Vec<EstimateResult>> {
    if lambdas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument(
            "lambda grid must be sorted in descending order".into(),
        ));
    }
    if lambdas.is_empty() {
        return Ok(Vec::new());
    }
    let prob = LassoProblem::new(m, delta, d_f)?;
    let mut out: Vec<EstimateResult> = Vec::with_capacity(lambdas.len());
    let mut warm = DenseMatrix::zeros(prob.n, prob.n);
    for &lambda in lambdas {
        let res = lasso_from(&prob, lambda, opts, warm)?;
        warm = res.a_hat.clone();
        out.push(res);
    }
    Ok(out)
}

/// Gradient of the smooth loss at `a`, exposed for optimality checks.
pub fn lasso_gradient(
    m: &MomentSet,
    delta: f64,
    d_f: &DenseMatrix,
    a: &DenseMatrix,
) -> Result<DenseMatrix> {
    Ok(LassoProblem::new(m, delta, d_f)?.gradient(a))
}

/// Result of profiling δ.
#[derive(Debug, Clone)]
pub struct DeltaProfile {
    pub delta: f64,
    /// `(δ, criterion)` for every grid point.
    pub criterion: Vec<(f64, f64)>,
}

/// Grid search for δ. With `A` free every δ fits the moments exactly, so
/// each candidate is scored by least squares with `A_ii = 0` imposed,
/// which is what ties the diagonal of `B` to `1−δ`.
pub fn profile_delta(m: &MomentSet, d_f: &DenseMatrix, grid: &[f64]) -> Result<DeltaProfile> {
    let n = check_conformable(None, d_f, m)?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("delta grid is empty".into()));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "profiling delta needs n >= 2".into(),
        ));
    }
    let x = d_f.matmul(&m.gamma0)?;
    let mut criterion = Vec::with_capacity(grid.len());
    for &delta in grid {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidArgument(format!(
                "delta grid value {delta} outside [0,1)"
            )));
        }
        let r = residual_target(m, delta);
        let mut total = 0.0;
        for i in 0..n {
            let idx: Vec<usize> = (0..n).filter(|&k| k != i).collect();
            let k = idx.len();
            let xtx = DenseMatrix::from_fn(k, k, |p, q| {
                (0..n).map(|c| x[(idx[p], c)] * x[(idx[q], c)]).sum()
            });
            let xr: Vec<f64> = (0..k)
                .map(|p| (0..n).map(|c| x[(idx[p], c)] * r[(i, c)]).sum())
                .collect();
            let (coef, _) = solve_normal_equations(&xtx, &xr)?;
            for c in 0..n {
                let fit: f64 = (0..k).map(|p| coef[p] * x[(idx[p], c)]).sum();
                total += (r[(i, c)] - fit).powi(2);
            }
        }
        criterion.push((delta, total));
    }
    let best = criterion
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|c| c.0)
        .expect("grid nonempty");
    Ok(DeltaProfile {
        delta: best,
        criterion,
    })
}
