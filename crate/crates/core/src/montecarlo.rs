//! Monte Carlo experiments: size, power, local alternatives, degenerate
//! networks, spectral heterogeneity and estimation accuracy.
//!
//! Each experiment is a list of cells (a network family at one `(n, T)`),
//! each run for `reps` replications. A replication's seed is a hash of the
//! master seed and its coordinates, so the record set does not depend on how
//! the work is scheduled.

use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::{
    covariance_heterogeneity, jacobian_on_path, latent_covariance, simulate, AggregateShock,
    DynamicsConfig, LinearizationPoint, LinkFunction, LinkKind,
};
use crate::error::{Error, Result};
use crate::estimation::{estimate_closed_form, sample_moments};
use crate::inference::{deviation_matrix, mc_critical_value, StatKind};
use crate::io::{Fingerprint, VERSION};
use crate::linalg::matching::sorted_pairing_error;
use crate::linalg::{eigenvalues, DenseMatrix};
use crate::networks::{generate, rescale_to_radius, spectral_summary, Family, NetworkSpec};
use crate::seed;

/// Maps `f` over `0..n` on a pool of `jobs` threads, returning results in
/// index order. `jobs <= 1` runs inline.
pub fn par_map<T, F>(jobs: usize, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if jobs <= 1 {
        return (0..n).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
        Err(_) => (0..n).map(f).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExperimentKind {
    Size,
    Power,
    LocalAlternative { c: f64 },
    Degenerate,
    SpectralHeterogeneity,
    Accuracy,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Size => "size",
            ExperimentKind::Power => "power",
            ExperimentKind::LocalAlternative { .. } => "local",
            ExperimentKind::Degenerate => "degenerate",
            ExperimentKind::SpectralHeterogeneity => "spectral",
            ExperimentKind::Accuracy => "accuracy",
        }
    }

    /// Whether replications are tested against a null reference.
    pub fn tests(&self) -> bool {
        !matches!(self, ExperimentKind::Accuracy)
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "size" => Ok(Self::Size),
            "power" => Ok(Self::Power),
            "local" | "localalternative" => Ok(Self::LocalAlternative { c: 1.0 }),
            "degenerate" => Ok(Self::Degenerate),
            "spectral" | "spectralheterogeneity" => Ok(Self::SpectralHeterogeneity),
            "accuracy" => Ok(Self::Accuracy),
            other => Err(Error::InvalidArgument(format!(
                "unknown experiment kind '{other}' (size, power, local, degenerate, spectral, accuracy)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// `(n, T)` cells.
    pub grid: Vec<(usize, usize)>,
    /// Template; `n`, `seed` and the family are set per cell.
    pub network: NetworkSpec,
    /// Families to run; empty means the template's family.
    pub families: Vec<Family>,
    /// Spectral radius of the dynamic interaction matrix under the
    /// alternative. For the spectral-heterogeneity kind it is instead the
    /// scalar multiplying the calibrated network, as in `(I − ρA)⁻¹`.
    pub rho: f64,
    pub delta: f64,
    pub sigma: f64,
    pub link: LinkFunction,
    pub burn_in: usize,
    pub reps: usize,
    /// Null simulations behind each Monte Carlo critical value.
    pub null_reps: usize,
    pub alpha: f64,
    pub stat: StatKind,
    pub master_seed: u64,
}

pub const DEFAULT_T_GRID: [usize; 4] = [50, 100, 200, 400];

impl ExperimentConfig {
    /// Documented defaults for each experiment kind.
    pub fn preset(kind: ExperimentKind) -> Self {
        let n = 25;
        let grid_t = |ts: &[usize]| ts.iter().map(|&t| (n, t)).collect::<Vec<_>>();
        let base = Self {
            kind,
            grid: grid_t(&DEFAULT_T_GRID),
            network: NetworkSpec::new(Family::Chain, n),
            families: Vec::new(),
            rho: 0.5,
            delta: 0.6,
            sigma: 1.0,
            link: LinkFunction::identity(),
            burn_in: 500,
            reps: 200,
            null_reps: 500,
            alpha: 0.05,
            stat: StatKind::Fro,
            master_seed: 20_240_601,
        };
        match kind {
            ExperimentKind::Size => Self {
                grid: vec![(n, 200)],
                reps: 500,
                ..base
            },
            ExperimentKind::Power | ExperimentKind::Accuracy => base,
            ExperimentKind::LocalAlternative { .. } => base,
            ExperimentKind::Degenerate => Self {
                grid: grid_t(&[50, 200, 400]),
                families: vec![Family::Complete, Family::RankOne, Family::Star],
                rho: 0.3,
                ..base
            },
            ExperimentKind::SpectralHeterogeneity => Self {
                grid: vec![(n, 200)],
                families: vec![Family::Sparse, Family::Hub, Family::Block, Family::Chain],
                rho: 0.06,
                ..base
            },
        }
    }

    pub fn families(&self) -> Vec<Family> {
        if self.families.is_empty() {
            vec![self.network.family]
        } else {
            self.families.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be >= 1".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidArgument("grid is empty".into()));
        }
        for &(n, t) in &self.grid {
            if n < 2 || t < 4 {
                return Err(Error::InvalidArgument(format!(
                    "grid cell (n={n}, T={t}) needs n >= 2 and T >= 4"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in [0,1), got {}",
                self.delta
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !self.rho.is_finite() || self.rho < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "rho must be finite and >= 0, got {}",
                self.rho
            )));
        }
        if let ExperimentKind::LocalAlternative { c } = self.kind {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "local alternative c must be >= 0, got {c}"
                )));
            }
        }
        if self.kind.tests() && self.null_reps < 100 {
            return Err(Error::InvalidArgument(format!(
                "null_reps must be >= 100, got {}",
                self.null_reps
            )));
        }
        self.link.validate()
    }

    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprint::new("experiment");
        fp.str(self.kind.name());
        if let ExperimentKind::LocalAlternative { c } = self.kind {
            fp.f64(c);
        }
        fp.usize(self.grid.len());
        for &(n, t) in &self.grid {
            fp.usize(n).usize(t);
        }
        fp.str(&format!("{:?}", self.network));
        for f in self.families() {
            fp.str(f.name());
        }
        fp.f64(self.rho)
            .f64(self.delta)
            .f64(self.sigma)
            .str(&self.link.kind.to_string())
            .f64s(&self.link.theta)
            .usize(self.burn_in)
            .usize(self.reps)
            .usize(self.null_reps)
            .f64(self.alpha)
            .str(&self.stat.to_string())
            .u64(self.master_seed);
        fp.hex()
    }

    /// One-line description of the DGP constants, written into output headers.
    pub fn describe(&self) -> String {
        format!(
            "kind={} rho={} delta={} sigma={} link={} burn_in={} reps={} null_reps={} alpha={} stat={} seed={}",
            self.kind.name(),
            self.rho,
            self.delta,
            self.sigma,
            self.link.kind,
            self.burn_in,
            self.reps,
            self.null_reps,
            self.alpha,
            self.stat,
            self.master_seed
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    /// Experiment kind, with the family appended (`power/chain`) except for
    /// size experiments where no network is involved.
    pub label: String,
    pub n: usize,
    pub t: usize,
    pub rep: usize,
    pub seed: u64,
    /// `None` when the experiment does not test.
    pub reject: Option<bool>,
    pub stat: f64,
    pub fro_error: f64,
    pub spec_error: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Failure message; failed records are excluded from aggregates.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub label: String,
    pub n: usize,
    pub t: usize,
    pub reps: usize,
    pub failed: usize,
    pub rejection_rate: Option<f64>,
    pub mc_standard_error: Option<f64>,
    pub critical_value: Option<f64>,
    pub median_fro_error: f64,
    pub mean_fro_error: f64,
    pub median_spec_error: f64,
    pub mean_spec_error: f64,
    pub mean_bias: f64,
    pub mean_rmse: f64,
    pub mean_stat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub cells: Vec<CellSummary>,
    pub failed: usize,
    /// Cells with no successful replication, omitted from `cells`.
    pub empty_cells: Vec<String>,
}

impl ExperimentSummary {
    pub fn cell(&self, label: &str, n: usize, t: usize) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.label == label && c.n == n && c.t == t)
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Aggregates records per `(label, n, T)` cell in first-appearance order.
pub fn summarize(records: &[ReplicationRecord]) -> ExperimentSummary {
    let mut keys: Vec<(String, usize, usize)> = Vec::new();
    for r in records {
        let key = (r.label.clone(), r.n, r.t);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut cells = Vec::new();
    let mut empty_cells = Vec::new();
    let mut failed_total = 0;
    for (label, n, t) in keys {
        let in_cell: Vec<&ReplicationRecord> = records
            .iter()
            .filter(|r| r.label == label && r.n == n && r.t == t)
            .collect();
        let ok: Vec<&&ReplicationRecord> = in_cell.iter().filter(|r| r.error.is_none()).collect();
        let failed = in_cell.len() - ok.len();
        failed_total += failed;
        if ok.is_empty() {
            empty_cells.push(format!("{label} n={n} T={t}"));
            continue;
        }
        let reps = ok.len();
        let decisions: Vec<bool> = ok.iter().filter_map(|r| r.reject).collect();
        let (rate, se) = if decisions.len() == reps {
            let p = decisions.iter().filter(|&&d| d).count() as f64 / reps as f64;
            (Some(p), Some((p * (1.0 - p) / reps as f64).sqrt()))
        } else {
            (None, None)
        };
        let col = |f: fn(&ReplicationRecord) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
        let mut fro = col(|r| r.fro_error);
        let mut spec = col(|r| r.spec_error);
        cells.push(CellSummary {
            label,
            n,
            t,
            reps,
            failed,
            rejection_rate: rate,
            mc_standard_error: se,
            critical_value: None,
            mean_fro_error: mean(&fro),
            median_fro_error: median(&mut fro),
            mean_spec_error: mean(&spec),
            median_spec_error: median(&mut spec),
            mean_bias: mean(&col(|r| r.bias)),
            mean_rmse: mean(&col(|r| r.rmse)),
            mean_stat: mean(&col(|r| r.stat)),
        });
    }
    ExperimentSummary {
        cells,
        failed: failed_total,
        empty_cells,
    }
}

/// One row of the spectral heterogeneity table.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub family: Family,
    pub n: usize,
    pub dispersion: f64,
    pub range: f64,
    pub radius: f64,
    pub cov_heterogeneity: f64,
    pub rejection_rate: Option<f64>,
    pub mc_standard_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub fingerprint: String,
    pub records: Vec<ReplicationRecord>,
    pub summary: ExperimentSummary,
    /// Filled for the spectral-heterogeneity kind, ordered by dispersion.
    pub study: Option<Vec<StudyRow>>,
}

/// A cell ready to run: the true dynamic interaction matrix is fixed.
struct CellPlan {
    label: String,
    family_code: u64,
    n: usize,
    t: usize,
    a_true: DenseMatrix,
    true_eigs: Vec<Complex64>,
}

/// Settings shared by every replication of an experiment.
struct RunParams {
    kind_tag: u64,
    delta: f64,
    sigma: f64,
    link: LinkFunction,
    burn_in: usize,
    reps: usize,
    null_reps: usize,
    alpha: f64,
    stat: StatKind,
    master_seed: u64,
    tests: bool,
}

impl RunParams {
    fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            kind_tag: seed::tag(cfg.kind.name()),
            delta: cfg.delta,
            sigma: cfg.sigma,
            link: cfg.link.clone(),
            burn_in: cfg.burn_in,
            reps: cfg.reps,
            null_reps: cfg.null_reps,
            alpha: cfg.alpha,
            stat: cfg.stat,
            master_seed: cfg.master_seed,
            tests: cfg.kind.tests(),
        }
    }

    fn dgp(&self, a: DenseMatrix, seed: u64) -> DynamicsConfig {
        DynamicsConfig::linear(a, self.delta, self.sigma, seed)
            .with_link(self.link.clone())
            .with_burn_in(self.burn_in)
    }
}

fn family_code(f: Family) -> u64 {
    Family::ALL.iter().position(|&g| g == f).unwrap_or(0) as u64 + 1
}

fn plan(
    label: String,
    family_code: u64,
    n: usize,
    t: usize,
    a_true: DenseMatrix,
) -> Result<CellPlan> {
    let true_eigs = eigenvalues(&a_true)?;
    Ok(CellPlan {
        label,
        family_code,
        n,
        t,
        a_true,
        true_eigs,
    })
}

fn network_for(cfg: &ExperimentConfig, family: Family, n: usize) -> Result<DenseMatrix> {
    let net_seed = seed::derive(&[
        seed::tag("network"),
        cfg.master_seed,
        family_code(family),
        n as u64,
    ]);
    let spec = if cfg.kind == ExperimentKind::SpectralHeterogeneity {
        NetworkSpec::calibrated(family, n, net_seed)
    } else {
        NetworkSpec {
            family,
            n,
            seed: net_seed,
            target_radius: None,
            target_dispersion: None,
            blocks: if family == cfg.network.family {
                cfg.network.blocks
            } else {
                None
            },
            ..cfg.network.clone()
        }
    };
    generate(&spec)
}

fn build_plans(cfg: &ExperimentConfig) -> Result<Vec<CellPlan>> {
    let mut plans = Vec::new();
    let kind = cfg.kind.name();
    if cfg.kind == ExperimentKind::Size {
        for &(n, t) in &cfg.grid {
            plans.push(plan(kind.to_string(), 0, n, t, DenseMatrix::zeros(n, n))?);
        }
        return Ok(plans);
    }
    for family in cfg.families() {
        for &(n, t) in &cfg.grid {
            let net = network_for(cfg, family, n)?;
            let a = match cfg.kind {
                ExperimentKind::SpectralHeterogeneity => net.scale(cfg.rho),
                ExperimentKind::LocalAlternative { c } => {
                    rescale_to_radius(&net, c / (t as f64).sqrt())?
                }
                _ => rescale_to_radius(&net, cfg.rho)?,
            };
            plans.push(plan(
                format!("{kind}/{family}"),
                family_code(family),
                n,
                t,
                a,
            )?);
        }
    }
    Ok(plans)
}

fn replicate(p: &CellPlan, rep: usize, params: &RunParams, cv: Option<f64>) -> ReplicationRecord {
    let seed = seed::derive(&[
        params.kind_tag,
        p.family_code,
        p.n as u64,
        p.t as u64,
        rep as u64,
        params.master_seed,
    ]);
    let mut rec = ReplicationRecord {
        label: p.label.clone(),
        n: p.n,
        t: p.t,
        rep,
        seed,
        reject: None,
        stat: f64::NAN,
        fro_error: f64::NAN,
        spec_error: f64::NAN,
        bias: f64::NAN,
        rmse: f64::NAN,
        error: None,
    };
    let outcome = (|| -> Result<()> {
        let cfg = params.dgp(p.a_true.clone(), seed);
        let path = simulate(&cfg, p.t)?;
        let m = sample_moments(&path, &AggregateShock::None)?;
        let stat = params.stat.compute(&deviation_matrix(&m, params.delta))?;
        let d_f = if params.link.kind == LinkKind::Identity && params.link.slope() == 1.0 {
            DenseMatrix::identity(p.n)
        } else {
            jacobian_on_path(&params.link, &path, LinearizationPoint::Mean)
        };
        let est = estimate_closed_form(&m, params.delta, &d_f)?;
        let err = &est.a_hat - &p.a_true;
        let nn = (p.n * p.n) as f64;
        rec.stat = stat;
        rec.reject = cv.map(|c| stat > c);
        rec.fro_error = err.frobenius_norm();
        rec.spec_error = sorted_pairing_error(&p.true_eigs, &eigenvalues(&est.a_hat)?);
        rec.bias = err.as_slice().iter().sum::<f64>() / nn;
        rec.rmse = rec.fro_error / nn.sqrt();
        Ok(())
    })();
    if let Err(e) = outcome {
        rec.error = Some(e.to_string());
        rec.reject = None;
    }
    rec
}

/// Runs all plans. Critical values are computed once per distinct `(n, T)`
/// from the exact null DGP (`A = 0`, same δ and σ).
fn execute(
    plans: &[CellPlan],
    params: &RunParams,
    jobs: usize,
) -> Result<(Vec<ReplicationRecord>, Vec<Option<f64>>)> {
    let mut cvs: Vec<Option<f64>> = Vec::with_capacity(plans.len());
    let mut cache: Vec<((usize, usize), f64)> = Vec::new();
    for p in plans {
        if !params.tests {
            cvs.push(None);
            continue;
        }
        if let Some((_, cv)) = cache.iter().find(|(k, _)| *k == (p.n, p.t)) {
            cvs.push(Some(*cv));
            continue;
        }
        let null_seed = seed::derive(&[
            seed::tag("null"),
            params.master_seed,
            p.n as u64,
            p.t as u64,
        ]);
        let null_cfg = params
            .dgp(DenseMatrix::zeros(p.n, p.n), null_seed)
            .with_link(LinkFunction::identity());
        let null = mc_critical_value(
            &null_cfg,
            p.t,
            params.stat,
            params.alpha,
            params.null_reps,
            null_seed,
            jobs,
        )?;
        cache.push(((p.n, p.t), null.critical_value));
        cvs.push(Some(null.critical_value));
    }
    let units: Vec<(usize, usize)> = (0..plans.len())
        .flat_map(|c| (0..params.reps).map(move |r| (c, r)))
        .collect();
    let records = par_map(jobs, units.len(), |u| {
        let (c, r) = units[u];
        replicate(&plans[c], r, params, cvs[c])
    });
    Ok((records, cvs))
}

fn attach_critical_values(
    summary: &mut ExperimentSummary,
    plans: &[CellPlan],
    cvs: &[Option<f64>],
) {
    for cell in &mut summary.cells {
        if let Some(k) = plans
            .iter()
            .position(|p| p.label == cell.label && p.n == cell.n && p.t == cell.t)
        {
            cell.critical_value = cvs[k];
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let plans = build_plans(cfg)?;
    let params = RunParams::from_config(cfg);
    let (records, cvs) = execute(&plans, &params, jobs)?;
    let mut summary = summarize(&records);
    attach_critical_values(&mut summary, &plans, &cvs);

    let study = if cfg.kind == ExperimentKind::SpectralHeterogeneity {
        let mut rows = Vec::new();
        for family in cfg.families() {
            for &(n, t) in &cfg.grid {
                let net = network_for(cfg, family, n)?;
                let cell = summary.cell(&format!("spectral/{family}"), n, t);
                rows.push(study_row(
                    family,
                    &net,
                    cfg.rho,
                    cfg.sigma,
                    cell.and_then(|c| c.rejection_rate),
                    cell.and_then(|c| c.mc_standard_error),
                )?);
            }
        }
        rows.sort_by(|a, b| a.dispersion.total_cmp(&b.dispersion));
        Some(rows)
    } else {
        None
    };

    Ok(ExperimentOutput {
        config: cfg.clone(),
        fingerprint: cfg.fingerprint(),
        records,
        summary,
        study,
    })
}

fn study_row(
    family: Family,
    a: &DenseMatrix,
    rho: f64,
    sigma: f64,
    rate: Option<f64>,
    se: Option<f64>,
) -> Result<StudyRow> {
    let s = spectral_summary(a)?;
    let cov = latent_covariance(a, rho, sigma)?;
    Ok(StudyRow {
        family,
        n: a.rows(),
        dispersion: s.dispersion,
        range: s.range,
        radius: s.radius,
        cov_heterogeneity: covariance_heterogeneity(&cov)?,
        rejection_rate: rate,
        mc_standard_error: se,
    })
}

/// Options for [`spectral_heterogeneity_study`]'s rejection column.
#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub t: usize,
    /// Zero skips the rejection column.
    pub reps: usize,
    pub null_reps: usize,
    pub alpha: f64,
    pub delta: f64,
    pub stat: StatKind,
    pub master_seed: u64,
    pub jobs: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            t: 200,
            reps: 0,
            null_reps: 500,
            alpha: 0.05,
            delta: 0.6,
            stat: StatKind::Fro,
            master_seed: 20_240_601,
            jobs: 1,
        }
    }
}

/// Per family: dispersion, spectral range, heterogeneity of
/// `Σ_U = σ²(I − ρA)⁻¹(I − ρA')⁻¹`, and (optionally) the rejection rate when
/// `ρA` drives the dynamics. Rows are ordered by dispersion.
pub fn spectral_heterogeneity_study(
    specs: &[NetworkSpec],
    rho: f64,
    sigma: f64,
    opts: &StudyOptions,
) -> Result<Vec<StudyRow>> {
    let mut nets = Vec::with_capacity(specs.len());
    for s in specs {
        nets.push((s.family, generate(s)?));
    }
    let (rates, ses): (Vec<Option<f64>>, Vec<Option<f64>>) = if opts.reps > 0 {
        let params = RunParams {
            kind_tag: seed::tag("spectral"),
            delta: opts.delta,
            sigma,
            link: LinkFunction::identity(),
            burn_in: 500,
            reps: opts.reps,
            null_reps: opts.null_reps,
            alpha: opts.alpha,
            stat: opts.stat,
            master_seed: opts.master_seed,
            tests: true,
        };
        let mut plans = Vec::new();
        for (k, (fam, a)) in nets.iter().enumerate() {
            // the index keeps repeated families apart
            plans.push(plan(
                format!("spectral/{fam}#{k}"),
                family_code(*fam) + 100 * k as u64,
                a.rows(),
                opts.t,
                a.scale(rho),
            )?);
        }
        let (records, _) = execute(&plans, &params, opts.jobs)?;
        let summary = summarize(&records);
        plans
            .iter()
            .map(|p| {
                let c = summary.cell(&p.label, p.n, p.t);
                (
                    c.and_then(|c| c.rejection_rate),
                    c.and_then(|c| c.mc_standard_error),
                )
            })
            .unzip()
    } else {
        (vec![None; nets.len()], vec![None; nets.len()])
    };
    let mut rows = Vec::with_capacity(nets.len());
    for (k, (fam, a)) in nets.iter().enumerate() {
        rows.push(study_row(*fam, a, rho, sigma, rates[k], ses[k])?);
    }
    rows.sort_by(|a, b| a.dispersion.total_cmp(&b.dispersion));
    Ok(rows)
}

fn header(out: &ExperimentOutput) -> String {
    format!(
        "# netident {VERSION} config={}\n# {}\n",
        out.fingerprint,
        out.config.describe()
    )
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Per-replication CSV.
pub fn records_csv(out: &ExperimentOutput) -> String {
    let mut s = header(out);
    s.push_str("kind,n,T,rep,seed,reject,stat,fro_error,spec_error,bias,rmse\n");
    for r in &out.records {
        let reject = match (r.reject, &r.error) {
            (_, Some(_)) => "failed".to_string(),
            (Some(b), None) => (b as u8).to_string(),
            (None, None) => String::new(),
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:e},{:e},{:e},{:e},{:e}",
            r.label,
            r.n,
            r.t,
            r.rep,
            r.seed,
            reject,
            r.stat,
            r.fro_error,
            r.spec_error,
            r.bias,
            r.rmse
        );
    }
    s
}

/// One row per cell, or per family for the spectral study.
pub fn summary_csv(out: &ExperimentOutput) -> String {
    let mut s = header(out);
    if let Some(rows) = &out.study {
        s.push_str("family,n,dispersion,range,radius,cov_heterogeneity,rejection_rate,mc_se\n");
        for r in rows {
            let _ = writeln!(
                s,
                "{},{},{:.6},{:.6},{:.6},{:.6},{},{}",
                r.family,
                r.n,
                r.dispersion,
                r.range,
                r.radius,
                r.cov_heterogeneity,
                fmt_opt(r.rejection_rate),
                fmt_opt(r.mc_standard_error)
            );
        }
        return s;
    }
    s.push_str("kind,n,T,reps,failed,rejection_rate,mc_se,critical_value,median_fro_error,median_spec_error,mean_bias,mean_rmse\n");
    for c in &out.summary.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6e},{:.6}",
            c.label,
            c.n,
            c.t,
            c.reps,
            c.failed,
            fmt_opt(c.rejection_rate),
            fmt_opt(c.mc_standard_error),
            fmt_opt(c.critical_value),
            c.median_fro_error,
            c.median_spec_error,
            c.mean_bias,
            c.mean_rmse
        );
    }
    s
}

/// `x,y,series` rows: power curves over `T`, error curves for accuracy
/// runs, and the dispersion scatter for the spectral study.
pub fn plot_csv(out: &ExperimentOutput) -> String {
    let mut s = header(out);
    s.push_str("x,y,series\n");
    if let Some(rows) = &out.study {
        for r in rows {
            if let Some(p) = r.rejection_rate {
                let _ = writeln!(
                    s,
                    "{},{},dispersion-rejection/{}",
                    r.dispersion, p, r.family
                );
            }
            let _ = writeln!(
                s,
                "{},{},dispersion-covstd/{}",
                r.dispersion, r.cov_heterogeneity, r.family
            );
        }
        return s;
    }
    for c in &out.summary.cells {
        match c.rejection_rate {
            Some(p) => {
                let _ = writeln!(s, "{},{},{}/n={}", c.t, p, c.label, c.n);
            }
            None => {
                let _ = writeln!(
                    s,
                    "{},{},{}/n={}/fro",
                    c.t, c.median_fro_error, c.label, c.n
                );
                let _ = writeln!(
                    s,
                    "{},{},{}/n={}/spec",
                    c.t, c.median_spec_error, c.label, c.n
                );
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(reject: bool) -> ReplicationRecord {
        ReplicationRecord {
            label: "x".into(),
            n: 2,
            t: 10,
            rep: 0,
            seed: 0,
            reject: Some(reject),
            stat: 1.0,
            fro_error: 1.0,
            spec_error: 1.0,
            bias: 0.0,
            rmse: 1.0,
            error: None,
        }
    }

    #[test]
    fn summarize_examples() {
        let all: Vec<_> = (0..10).map(|_| rec(true)).collect();
        let s = summarize(&all);
        assert_eq!(s.cells[0].rejection_rate, Some(1.0));
        assert_eq!(s.cells[0].mc_standard_error, Some(0.0));

        let half: Vec<_> = (0..100).map(|i| rec(i % 2 == 0)).collect();
        let s = summarize(&half);
        assert_eq!(s.cells[0].rejection_rate, Some(0.5));
        assert!((s.cells[0].mc_standard_error.unwrap() - 0.05).abs() < 1e-15);

        let s = summarize(&[rec(false)]);
        assert_eq!(s.cells[0].rejection_rate, Some(0.0));
    }

    #[test]
    fn failed_records_are_counted_not_aggregated() {
        let mut bad = rec(true);
        bad.error = Some("boom".into());
        let s = summarize(&[rec(false), bad.clone()]);
        assert_eq!(s.failed, 1);
        assert_eq!(s.cells[0].reps, 1);
        assert_eq!(s.cells[0].rejection_rate, Some(0.0));
        let s = summarize(&[bad]);
        assert!(s.cells.is_empty());
        assert_eq!(s.empty_cells.len(), 1);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    fn tiny(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            grid: vec![(4, 40)],
            reps: 3,
            null_reps: 100,
            burn_in: 50,
            ..ExperimentConfig::preset(kind)
        }
    }

    #[test]
    fn single_rep_runs_are_reproducible() {
        let mut cfg = tiny(ExperimentKind::Power);
        cfg.reps = 1;
        let a = run_experiment(&cfg, 1).unwrap();
        let b = run_experiment(&cfg, 1).unwrap();
        assert_eq!(records_csv(&a), records_csv(&b));
    }

    #[test]
    fn parallel_matches_serial() {
        let cfg = tiny(ExperimentKind::Degenerate);
        let a = run_experiment(&cfg, 1).unwrap();
        let b = run_experiment(&cfg, 4).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(summary_csv(&a), summary_csv(&b));
    }

    #[test]
    fn size_errors_are_noise_norms() {
        let out = run_experiment(&tiny(ExperimentKind::Size), 1).unwrap();
        assert!(out
            .records
            .iter()
            .all(|r| r.error.is_none() && r.reject.is_some()));
        assert!(out.records.iter().all(|r| r.fro_error > 0.0));
    }

    #[test]
    fn accuracy_does_not_test() {
        let out = run_experiment(&tiny(ExperimentKind::Accuracy), 1).unwrap();
        assert!(out.records.iter().all(|r| r.reject.is_none()));
        assert_eq!(out.summary.cells[0].rejection_rate, None);
        assert!(plot_csv(&out).contains("/fro"));
    }

    #[test]
    fn cell_seeds_do_not_depend_on_grid_order() {
        let mut cfg = tiny(ExperimentKind::Power);
        cfg.grid = vec![(4, 40), (4, 60)];
        let a = run_experiment(&cfg, 1).unwrap();
        cfg.grid.reverse();
        let b = run_experiment(&cfg, 1).unwrap();
        let find = |o: &ExperimentOutput| {
            o.records
                .iter()
                .find(|r| r.t == 60 && r.rep == 2)
                .cloned()
                .unwrap()
        };
        assert_eq!(find(&a), find(&b));
    }

    #[test]
    fn study_with_zero_rho_has_no_heterogeneity() {
        let specs: Vec<NetworkSpec> = [Family::Chain, Family::Sparse]
            .iter()
            .map(|&f| NetworkSpec::calibrated(f, 10, 1))
            .collect();
        let rows =
            spectral_heterogeneity_study(&specs, 0.0, 1.0, &StudyOptions::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.cov_heterogeneity == 0.0));
        assert!(rows[0].dispersion <= rows[1].dispersion);
        let one =
            spectral_heterogeneity_study(&specs[..1], 0.05, 1.0, &StudyOptions::default()).unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let mut cfg = tiny(ExperimentKind::Size);
        cfg.reps = 0;
        assert!(run_experiment(&cfg, 1).is_err());
        let mut cfg = tiny(ExperimentKind::Size);
        cfg.grid = vec![(4, 3)];
        assert!(run_experiment(&cfg, 1).is_err());
        let mut cfg = tiny(ExperimentKind::Power);
        cfg.null_reps = 10;
        assert!(run_experiment(&cfg, 1).is_err());
    }

    #[test]
    fn outputs_carry_fingerprint_header() {
        let out = run_experiment(&tiny(ExperimentKind::Size), 1).unwrap();
        for text in [records_csv(&out), summary_csv(&out), plot_csv(&out)] {
            assert!(text.starts_with(&format!("# netident {VERSION} config={}", out.fingerprint)));
        }
    }
}
