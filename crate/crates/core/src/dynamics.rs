//! The nonlinear network law of motion
//! `z_{t+1} = (1−δ) z_t + A f(z_t, θ) + s_t + ε_t`, its linearization, and
//! the covariances it implies.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::Fingerprint;
use crate::linalg::eigen::symmetric_eigen;
use crate::linalg::{matrix_inverse, solve_discrete_lyapunov, spectral_radius, DenseMatrix};
use crate::seed;

/// `‖z_t‖∞` beyond which a simulation is declared explosive.
pub const DIVERGENCE_GUARD: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Identity,
    Tanh,
    Logistic,
    Softplus,
}

impl FromStr for LinkKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "linear" => Ok(LinkKind::Identity),
            "tanh" => Ok(LinkKind::Tanh),
            "logistic" | "sigmoid" => Ok(LinkKind::Logistic),
            "softplus" => Ok(LinkKind::Softplus),
            other => Err(Error::InvalidArgument(format!(
                "unknown link function '{other}'"
            ))),
        }
    }
}

impl fmt::Display for LinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LinkKind::Identity => "identity",
            LinkKind::Tanh => "tanh",
            LinkKind::Logistic => "logistic",
            LinkKind::Softplus => "softplus",
        };
        f.write_str(s)
    }
}

/// A componentwise link `f(z, θ)`. `theta[0]` is a slope `s` (default 1):
///
/// * identity: `s z`
/// * tanh: `tanh(s z)`
/// * logistic: `1 / (1 + e^{−s z})`
/// * softplus: `ln(1 + e^{s z}) / s`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkFunction {
    pub kind: LinkKind,
    #[serde(default)]
    pub theta: Vec<f64>,
}

impl LinkFunction {
    pub fn new(kind: LinkKind) -> Self {
        Self {
            kind,
            theta: Vec::new(),
        }
    }

    pub fn identity() -> Self {
        Self::new(LinkKind::Identity)
    }

    pub fn with_slope(kind: LinkKind, slope: f64) -> Self {
        Self {
            kind,
            theta: vec![slope],
        }
    }

    pub fn slope(&self) -> f64 {
        self.theta.first().copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.slope();
        if !s.is_finite() || s == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "link slope must be finite and nonzero, got {s}"
            )));
        }
        if self.theta.len() > 1 {
            return Err(Error::InvalidArgument(
                "links take a single slope parameter".into(),
            ));
        }
        Ok(())
    }

    pub fn lipschitz(&self) -> f64 {
        let s = self.slope().abs();
        match self.kind {
            LinkKind::Identity | LinkKind::Tanh => s,
            LinkKind::Logistic => s / 4.0,
            LinkKind::Softplus => 1.0,
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        let s = self.slope();
        match self.kind {
            LinkKind::Identity => s * z,
            LinkKind::Tanh => (s * z).tanh(),
            LinkKind::Logistic => logistic(s * z),
            // ln(1+e^x) = max(x,0) + ln(1+e^{-|x|}) avoids overflow
            LinkKind::Softplus => {
                let x = s * z;
                (x.max(0.0) + (-x.abs()).exp().ln_1p()) / s
            }
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        let s = self.slope();
        match self.kind {
            LinkKind::Identity => s,
            LinkKind::Tanh => {
                let t = (s * z).tanh();
                s * (1.0 - t * t)
            }
            LinkKind::Logistic => {
                let p = logistic(s * z);
                s * p * (1.0 - p)
            }
            LinkKind::Softplus => logistic(s * z),
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn link_eval(link: &LinkFunction, z: &[f64]) -> Vec<f64> {
    z.iter().map(|&x| link.value(x)).collect()
}

/// `D_f = diag(f'(z_i))`.
pub fn link_jacobian(link: &LinkFunction, z: &[f64]) -> DenseMatrix {
    DenseMatrix::from_diag(&z.iter().map(|&x| link.derivative(x)).collect::<Vec<_>>())
}

/// Observable common forcing `s_t`, identical across units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AggregateShock {
    #[default]
    None,
    Constant {
        value: f64,
    },
    Sinusoid {
        amplitude: f64,
        period: f64,
    },
}

impl AggregateShock {
    /// Value at absolute step `t` (the first transition is `t = 0`).
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            AggregateShock::None => 0.0,
            AggregateShock::Constant { value } => value,
            AggregateShock::Sinusoid { amplitude, period } => {
                amplitude * (2.0 * std::f64::consts::PI * t as f64 / period).sin()
            }
        }
    }

    /// Per-period regressors spanning the shock's footprint in the states.
    /// Empty when there is nothing to remove.
    pub fn regressors(&self, t: usize) -> Vec<f64> {
        match *self {
            AggregateShock::None => Vec::new(),
            AggregateShock::Constant { .. } => vec![1.0],
            AggregateShock::Sinusoid { period, .. } => {
                let w = 2.0 * std::f64::consts::PI * t as f64 / period;
                vec![1.0, w.sin(), w.cos()]
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AggregateShock::Sinusoid { period, amplitude }
                if !(period > 0.0 && amplitude.is_finite()) =>
            {
                Err(Error::InvalidArgument(format!(
                    "sinusoid needs period > 0, got {period}"
                )))
            }
            AggregateShock::Constant { value } if !value.is_finite() => Err(
                Error::InvalidArgument("constant shock must be finite".into()),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsConfig {
    pub n: usize,
    pub delta: f64,
    pub a: DenseMatrix,
    pub link: LinkFunction,
    pub omega: DenseMatrix,
    pub aggregate_shock: AggregateShock,
    pub burn_in: usize,
    pub seed: u64,
    /// Starting state; zero when absent. Mostly useful for checking the
    /// deterministic part of the recursion.
    pub initial: Option<Vec<f64>>,
}

impl DynamicsConfig {
    /// Linear system with `Ω = σ²I`, no aggregate shock and 500 burn-in steps.
    pub fn linear(a: DenseMatrix, delta: f64, sigma: f64, seed: u64) -> Self {
        let n = a.rows();
        Self {
            n,
            delta,
            a,
            link: LinkFunction::identity(),
            omega: DenseMatrix::identity(n).scale(sigma * sigma),
            aggregate_shock: AggregateShock::None,
            burn_in: 500,
            seed,
            initial: None,
        }
    }

    pub fn with_link(mut self, link: LinkFunction) -> Self {
        self.link = link;
        self
    }

    pub fn with_burn_in(mut self, b: usize) -> Self {
        self.burn_in = b;
        self
    }

    pub fn with_shock(mut self, s: AggregateShock) -> Self {
        self.aggregate_shock = s;
        self
    }

    pub fn with_initial(mut self, z0: Vec<f64>) -> Self {
        self.initial = Some(z0);
        self
    }

    pub fn with_omega(mut self, omega: DenseMatrix) -> Self {
        self.omega = omega;
        self
    }

    /// Shapes, ranges and symmetry. Stability is checked separately with
    /// [`check_stability`] because it depends on the linearization point.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if self.a.rows() != n || self.a.cols() != n {
            return Err(Error::dim(format!(
                "A is {}x{}, expected {n}x{n}",
                self.a.rows(),
                self.a.cols()
            )));
        }
        if self.omega.rows() != n || self.omega.cols() != n {
            return Err(Error::dim(format!(
                "Omega is {}x{}, expected {n}x{n}",
                self.omega.rows(),
                self.omega.cols()
            )));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in [0,1), got {}",
                self.delta
            )));
        }
        if !self
            .omega
            .is_symmetric(1e-12 * (1.0 + self.omega.max_abs()))
        {
            return Err(Error::InvalidArgument("Omega must be symmetric".into()));
        }
        let (d, _) = symmetric_eigen(&self.omega.symmetrize(), 200)?;
        if d[0] < -1e-10 * (1.0 + self.omega.max_abs()) {
            return Err(Error::InvalidArgument(format!(
                "Omega must be positive semidefinite (smallest eigenvalue {:e})",
                d[0]
            )));
        }
        self.link.validate()?;
        self.aggregate_shock.validate()?;
        if let Some(z0) = &self.initial {
            if z0.len() != n || z0.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(
                    "initial state must be finite with length n".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn fingerprint(&self, t: usize) -> String {
        let mut fp = Fingerprint::new("dynamics");
        fp.usize(self.n)
            .f64(self.delta)
            .matrix(&self.a)
            .str(&self.link.kind.to_string())
            .f64s(&self.link.theta)
            .matrix(&self.omega)
            .str(&format!("{:?}", self.aggregate_shock))
            .usize(self.burn_in)
            .u64(self.seed)
            .usize(t);
        if let Some(z0) = &self.initial {
            fp.f64s(z0);
        }
        fp.hex()
    }
}

/// An observed path: `T × n` states after burn-in.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub states: DenseMatrix,
    pub fingerprint: String,
    pub seed: u64,
    /// Absolute step index of the first recorded state, used to line up
    /// deterministic aggregate-shock regressors.
    pub offset: usize,
}

impl SimPath {
    pub fn from_states(states: DenseMatrix) -> Result<Self> {
        if states.rows() < 2 {
            return Err(Error::InsufficientData(format!(
                "a path needs T >= 2, got {}",
                states.rows()
            )));
        }
        Ok(Self {
            states,
            fingerprint: "imported".into(),
            seed: 0,
            offset: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.states.rows() == 0
    }

    pub fn n(&self) -> usize {
        self.states.cols()
    }

    pub fn state(&self, t: usize) -> &[f64] {
        self.states.row(t)
    }

    pub fn mean(&self) -> Vec<f64> {
        let t = self.len() as f64;
        (0..self.n())
            .map(|j| self.states.column(j).iter().sum::<f64>() / t)
            .collect()
    }

    /// The path repeated `k` times end to end.
    pub fn repeated(&self, k: usize) -> Self {
        let mut data = Vec::with_capacity(self.states.as_slice().len() * k);
        for _ in 0..k {
            data.extend_from_slice(self.states.as_slice());
        }
        Self {
            states: DenseMatrix::from_raw(self.len() * k, self.n(), data),
            ..self.clone()
        }
    }
}

/// Square root of a PSD matrix; diagonal inputs take the cheap route.
fn psd_sqrt(omega: &DenseMatrix) -> Result<DenseMatrix> {
    let n = omega.rows();
    let off_diag = (0..n).any(|i| (0..n).any(|j| i != j && omega[(i, j)] != 0.0));
    if !off_diag {
        return Ok(DenseMatrix::from_diag(
            &omega
                .diag()
                .iter()
                .map(|d| d.max(0.0).sqrt())
                .collect::<Vec<_>>(),
        ));
    }
    let (d, v) = symmetric_eigen(&omega.symmetrize(), 200)?;
    let root = DenseMatrix::from_fn(n, n, |i, j| v[(i, j)] * d[j].max(0.0).sqrt());
    Ok(root.matmul_unchecked(&v.transpose()))
}

pub fn simulate(cfg: &DynamicsConfig, t_len: usize) -> Result<SimPath> {
    cfg.validate()?;
    if t_len < 2 {
        return Err(Error::InsufficientData(format!(
            "simulation length must be >= 2, got {t_len}"
        )));
    }
    let n = cfg.n;
    let root = psd_sqrt(&cfg.omega)?;
    let diagonal_root = (0..n).all(|i| (0..n).all(|j| i == j || root[(i, j)] == 0.0));
    let mut rng = seed::rng(seed::derive(&[seed::tag("shocks"), cfg.seed]));
    let phi = 1.0 - cfg.delta;
    let identity_link = cfg.link.kind == LinkKind::Identity && cfg.link.slope() == 1.0;

    let mut z = cfg.initial.clone().unwrap_or_else(|| vec![0.0; n]);
    let mut next = vec![0.0; n];
    let mut eps = vec![0.0; n];
    let mut fz = vec![0.0; n];
    let mut out = Vec::with_capacity(t_len * n);
    let total = cfg.burn_in + t_len;

    for step in 0..total {
        for e in eps.iter_mut() {
            *e = StandardNormal.sample(&mut rng);
        }
        if identity_link {
            fz.copy_from_slice(&z);
        } else {
            for (f, &x) in fz.iter_mut().zip(&z) {
                *f = cfg.link.value(x);
            }
        }
        let s = cfg.aggregate_shock.at(step);
        let mut max_abs: f64 = 0.0;
        for i in 0..n {
            let arow = cfg.a.row(i);
            let mut acc = phi * z[i] + s;
            for (aij, fj) in arow.iter().zip(&fz) {
                acc += aij * fj;
            }
            if diagonal_root {
                acc += root[(i, i)] * eps[i];
            } else {
                acc += root
                    .row(i)
                    .iter()
                    .zip(&eps)
                    .map(|(r, e)| r * e)
                    .sum::<f64>();
            }
            next[i] = acc;
            max_abs = max_abs.max(acc.abs());
        }
        if !(max_abs <= DIVERGENCE_GUARD) {
            return Err(Error::Explosion {
                step: step + 1,
                max_abs,
            });
        }
        std::mem::swap(&mut z, &mut next);
        if step >= cfg.burn_in {
            out.extend_from_slice(&z);
        }
    }
    Ok(SimPath {
        states: DenseMatrix::from_raw(t_len, n, out),
        fingerprint: cfg.fingerprint(t_len),
        seed: cfg.seed,
        offset: cfg.burn_in + 1,
    })
}

/// `B = (1−δ)I + A·D_f(z*)`.
pub fn effective_operator(cfg: &DynamicsConfig, z_star: &[f64]) -> Result<DenseMatrix> {
    if z_star.len() != cfg.n {
        return Err(Error::dim(format!(
            "linearization point has length {}, expected {}",
            z_star.len(),
            cfg.n
        )));
    }
    let d = link_jacobian(&cfg.link, z_star);
    operator_from(&cfg.a, cfg.delta, &d)
}

pub fn operator_from(a: &DenseMatrix, delta: f64, d_f: &DenseMatrix) -> Result<DenseMatrix> {
    let mut b = a.matmul(d_f)?;
    for i in 0..b.rows() {
        b[(i, i)] += 1.0 - delta;
    }
    Ok(b)
}

/// Spectral radius of `B` at `z_star`, or an instability error when it is ≥ 1.
pub fn check_stability(cfg: &DynamicsConfig, z_star: &[f64]) -> Result<f64> {
    let radius = spectral_radius(&effective_operator(cfg, z_star)?)?;
    if radius >= 1.0 {
        Err(Error::Instability { radius })
    } else {
        Ok(radius)
    }
}

/// Where to evaluate `D_f` when linearizing an observed path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearizationPoint {
    #[default]
    Mean,
    Zero,
}

impl FromStr for LinearizationPoint {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(Self::Mean),
            "zero" => Ok(Self::Zero),
            other => Err(Error::InvalidArgument(format!(
                "unknown linearization point '{other}'"
            ))),
        }
    }
}

pub fn jacobian_on_path(
    link: &LinkFunction,
    path: &SimPath,
    point: LinearizationPoint,
) -> DenseMatrix {
    let z = match point {
        LinearizationPoint::Mean => path.mean(),
        LinearizationPoint::Zero => vec![0.0; path.n()],
    };
    link_jacobian(link, &z)
}

/// `(Γ₀, Γ₁)` with `Γ₀ = BΓ₀B' + Ω` and `Γ₁ = BΓ₀`.
pub fn implied_covariances(
    b: &DenseMatrix,
    omega: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let g0 = solve_discrete_lyapunov(b, omega)?;
    let g1 = b.matmul(&g0)?;
    Ok((g0, g1))
}

/// `Σ_U = σ² (I − ρA)⁻¹ (I − ρA')⁻¹`.
pub fn latent_covariance(a: &DenseMatrix, rho: f64, sigma: f64) -> Result<DenseMatrix> {
    let n = a.require_square("latent covariance A")?;
    let mut m = a.scale(-rho);
    for i in 0..n {
        m[(i, i)] += 1.0;
    }
    let minv = matrix_inverse(&m)?;
    let scaled_radius = rho.abs() * spectral_radius(a)?;
    if scaled_radius >= 1.0 {
        return Err(Error::Instability {
            radius: scaled_radius,
        });
    }
    let s = minv
        .matmul_unchecked(&minv.transpose())
        .scale(sigma * sigma);
    Ok(s.symmetrize())
}

/// Population standard deviation of `{Σ_ij : i < j}`.
pub fn covariance_heterogeneity(sigma: &DenseMatrix) -> Result<f64> {
    let n = sigma.require_square("covariance")?;
    if n < 2 {
        return Err(Error::dim("covariance heterogeneity needs n >= 2"));
    }
    let vals: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| sigma[(i, j)])
        .collect();
    let m = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / m;
    Ok((vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m).sqrt())
}
