//! Command-line front end. The binary in `src/bin` only forwards here.
//!
//! Configuration is a TOML document with `[network]`, `[dynamics]`,
//! `[experiment]` and `[output]` sections; flags override file values.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use crate::dynamics::{
    jacobian_on_path, simulate, AggregateShock, DynamicsConfig, LinearizationPoint, LinkFunction,
    LinkKind, SimPath,
};
use crate::error::{Error, Result};
use crate::estimation::{
    estimate_closed_form, estimate_gmm_two_step, estimate_lasso, profile_delta, sample_moments,
    EstimateResult, LassoOptions,
};
use crate::inference::{run_test, CriticalSource, StatKind, TestOptions};
use crate::io::{matrix_from_csv, matrix_to_csv, path_from_csv, path_to_csv, Fingerprint, VERSION};
use crate::linalg::DenseMatrix;
use crate::montecarlo::{
    plot_csv, records_csv, run_experiment, summary_csv, ExperimentConfig, ExperimentKind,
    ExperimentOutput,
};
use crate::networks::{generate, rescale_to_radius, spectral_summary, Family, NetworkSpec};
use crate::seed;

/// Seed used when neither a flag, the config nor `NETIDENT_SEED` gives one.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub delta: Option<f64>,
    /// Shock scale; `Ω = σ²I`.
    pub sigma: Option<f64>,
    /// Rescale the network to this spectral radius. Zero means `A = 0`.
    pub rho: Option<f64>,
    /// Read `A` from a matrix CSV instead of generating a network.
    pub a_file: Option<PathBuf>,
    pub link: Option<LinkKind>,
    pub slope: Option<f64>,
    pub burn_in: Option<usize>,
    #[serde(rename = "T", alias = "t")]
    pub t: Option<usize>,
    pub seed: Option<u64>,
    pub shock: Option<AggregateShock>,
    pub initial: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: Option<String>,
    pub n: Option<Vec<usize>>,
    #[serde(rename = "T", alias = "t")]
    pub t: Option<Vec<usize>>,
    pub families: Option<Vec<Family>>,
    pub rho: Option<f64>,
    /// Local-alternative constant in `ρ_T = c/√T`.
    pub c: Option<f64>,
    pub reps: Option<usize>,
    pub null_reps: Option<usize>,
    pub alpha: Option<f64>,
    pub stat: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub network: Option<NetworkSpec>,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    pub experiment: Option<ExperimentSection>,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory of the config file, for resolving relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl CliConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: CliConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Range checks that do not need any computation.
    pub fn validate(&self) -> Result<()> {
        if let Some(net) = &self.network {
            net.validate()
                .map_err(|e| Error::Config(format!("[network] {e}")))?;
        }
        let d = &self.dynamics;
        if let Some(delta) = d.delta {
            check((0.0..1.0).contains(&delta), || {
                format!("[dynamics] delta must lie in [0,1), got {delta}")
            })?;
        }
        if let Some(s) = d.sigma {
            check(s >= 0.0 && s.is_finite(), || {
                format!("[dynamics] sigma must be >= 0, got {s}")
            })?;
        }
        if let Some(r) = d.rho {
            check(r >= 0.0 && r.is_finite(), || {
                format!("[dynamics] rho must be >= 0, got {r}")
            })?;
        }
        if let Some(s) = d.slope {
            check(s > 0.0 && s.is_finite(), || {
                format!("[dynamics] slope must be > 0, got {s}")
            })?;
        }
        if let Some(t) = d.t {
            check(t >= 2, || format!("[dynamics] T must be >= 2, got {t}"))?;
        }
        if let Some(shock) = &d.shock {
            shock
                .validate()
                .map_err(|e| Error::Config(format!("[dynamics] {e}")))?;
        }
        if let Some(e) = &self.experiment {
            if let Some(kind) = &e.kind {
                kind.parse::<ExperimentKind>()
                    .map_err(|err| Error::Config(format!("[experiment] {err}")))?;
            }
            if let Some(stat) = &e.stat {
                stat.parse::<StatKind>()
                    .map_err(|err| Error::Config(format!("[experiment] {err}")))?;
            }
            if let Some(a) = e.alpha {
                check(a > 0.0 && a < 1.0, || {
                    format!("[experiment] alpha must lie in (0,1), got {a}")
                })?;
            }
            if let Some(r) = e.reps {
                check(r >= 1, || "[experiment] reps must be >= 1".into())?;
            }
            if let Some(r) = e.null_reps {
                check(r >= 100, || {
                    format!("[experiment] null_reps must be >= 100, got {r}")
                })?;
            }
            if let Some(ns) = &e.n {
                check(ns.iter().all(|&n| n >= 2), || {
                    "[experiment] every n must be >= 2".into()
                })?;
            }
            if let Some(ts) = &e.t {
                check(ts.iter().all(|&t| t >= 4), || {
                    "[experiment] every T must be >= 4".into()
                })?;
            }
            if let Some(r) = e.rho {
                check(r >= 0.0 && r.is_finite(), || {
                    format!("[experiment] rho must be >= 0, got {r}")
                })?;
            }
            if let Some(c) = e.c {
                check(c >= 0.0 && c.is_finite(), || {
                    format!("[experiment] c must be >= 0, got {c}")
                })?;
            }
        }
        Ok(())
    }

    fn link(&self) -> LinkFunction {
        LinkFunction::with_slope(
            self.dynamics.link.unwrap_or(LinkKind::Identity),
            self.dynamics.slope.unwrap_or(1.0),
        )
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// The dynamic interaction matrix: from `a_file`, or the network
    /// rescaled to `rho` (default 0.5).
    fn interaction_matrix(&self, seed_value: u64) -> Result<DenseMatrix> {
        if let Some(file) = &self.dynamics.a_file {
            let path = self.resolve(file);
            let text = fs::read_to_string(&path).map_err(|e| {
                Error::Config(format!("cannot read a_file {}: {e}", path.display()))
            })?;
            return matrix_from_csv(&text);
        }
        let mut spec = self
            .network
            .clone()
            .ok_or_else(|| Error::Config("need a [network] section or [dynamics] a_file".into()))?;
        if self.network.as_ref().is_some_and(|n| n.seed == 0) {
            spec.seed = seed::derive(&[seed::tag("network"), seed_value]);
        }
        let rho = self.dynamics.rho.unwrap_or(0.5);
        if rho == 0.0 {
            return Ok(DenseMatrix::zeros(spec.n, spec.n));
        }
        let net = generate(&spec)?;
        if spec.target_radius.is_some() || spec.target_dispersion.is_some() {
            return Ok(net);
        }
        rescale_to_radius(&net, rho)
    }

    pub fn dynamics_config(&self, seed_value: u64) -> Result<DynamicsConfig> {
        let a = self.interaction_matrix(seed_value)?;
        let d = &self.dynamics;
        let mut cfg = DynamicsConfig::linear(
            a,
            d.delta.unwrap_or(0.6),
            d.sigma.unwrap_or(1.0),
            seed_value,
        )
        .with_link(self.link())
        .with_burn_in(d.burn_in.unwrap_or(500))
        .with_shock(d.shock.unwrap_or_default());
        if let Some(z0) = &d.initial {
            cfg = cfg.with_initial(z0.clone());
        }
        cfg.validate().map_err(|e| match e {
            Error::Spec(_) | Error::InvalidArgument(_) | Error::Dimension(_) => {
                Error::Config(e.to_string())
            }
            other => other,
        })?;
        Ok(cfg)
    }

    /// Preset for `kind`, overlaid with the `[experiment]`, `[dynamics]`
    /// and `[network]` sections.
    pub fn experiment_config(
        &self,
        kind: Option<ExperimentKind>,
        seed_value: u64,
    ) -> Result<ExperimentConfig> {
        let e = self.experiment.clone().unwrap_or_default();
        let kind = match (kind, &e.kind) {
            (Some(k), _) => k,
            (None, Some(s)) => s.parse()?,
            (None, None) => {
                return Err(Error::Config(
                    "experiment kind missing: pass --kind or set [experiment] kind".into(),
                ))
            }
        };
        let kind = match (kind, e.c) {
            (ExperimentKind::LocalAlternative { .. }, Some(c)) => {
                ExperimentKind::LocalAlternative { c }
            }
            (k, _) => k,
        };
        let mut cfg = ExperimentConfig::preset(kind);
        if let Some(net) = &self.network {
            cfg.network = net.clone();
        }
        let ns = e.n.clone().unwrap_or_else(|| {
            let mut v: Vec<usize> = cfg.grid.iter().map(|g| g.0).collect();
            v.dedup();
            v
        });
        let ts =
            e.t.clone()
                .unwrap_or_else(|| cfg.grid.iter().map(|g| g.1).collect());
        cfg.grid = ns
            .iter()
            .flat_map(|&n| ts.iter().map(move |&t| (n, t)))
            .collect();
        if let Some(f) = &e.families {
            cfg.families = f.clone();
        }
        if let Some(r) = e.rho {
            cfg.rho = r;
        }
        if let Some(r) = e.reps {
            cfg.reps = r;
        }
        if let Some(r) = e.null_reps {
            cfg.null_reps = r;
        }
        if let Some(a) = e.alpha {
            cfg.alpha = a;
        }
        if let Some(s) = &e.stat {
            cfg.stat = s.parse()?;
        }
        let d = &self.dynamics;
        if let Some(v) = d.delta {
            cfg.delta = v;
        }
        if let Some(v) = d.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = d.burn_in {
            cfg.burn_in = v;
        }
        cfg.link = self.link();
        cfg.master_seed = seed_value;
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "netident",
    version,
    about = "Simulate, estimate and test latent interaction networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML configuration file
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Master seed (falls back to the config, then NETIDENT_SEED)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Closed,
    Gmm,
    Lasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriticalArg {
    Chi2,
    Mc,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a path and write it as CSV
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Path length after burn-in
        #[arg(long = "T", short = 'T')]
        t: Option<usize>,
    },
    /// Estimate the interaction matrix from a path
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Path CSV (or JSONL); without it the config is simulated
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long)]
        lambda: Option<f64>,
        /// Depreciation rate, or "auto" to profile it
        #[arg(long)]
        delta: Option<String>,
    },
    /// Test for network dependence
    Test {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value = "fro")]
        stat: String,
        #[arg(long, value_enum, default_value_t = CriticalArg::Mc)]
        critical: CriticalArg,
        /// Null simulations for Monte Carlo critical values
        #[arg(long, default_value_t = 500)]
        reps: usize,
        /// Degrees of freedom for the chi-square reference (default n²)
        #[arg(long)]
        df: Option<usize>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Spectral summary of a network
    Spectra {
        #[command(flatten)]
        common: Common,
        /// Matrix CSV with a `# n=<n>` header
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        family: Option<Family>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run a Monte Carlo experiment
    Mc {
        #[command(flatten)]
        common: Common,
        /// size, power, local, degenerate, spectral or accuracy
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        null_reps: Option<usize>,
    },
}

impl clap::builder::ValueParserFactory for Family {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<Family>().map_err(|e| e.to_string()))
    }
}

/// Exit code for an error: 2 for bad input, 3 for numerical failure, 4 for
/// degenerate data.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::Parse(_)
        | Error::Io(_)
        | Error::InvalidArgument(_)
        | Error::Spec(_)
        | Error::Dimension(_)
        | Error::InsufficientData(_) => 2,
        Error::Singular { .. } | Error::DegenerateInformation(_) => 4,
        Error::Explosion { .. }
        | Error::Instability { .. }
        | Error::Convergence { .. }
        | Error::NonFinite { .. } => 3,
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("netident: {e}");
            if code == 4 {
                eprintln!(
                    "hint: the moment matrix carries too little information; try --method lasso"
                );
            }
            code
        }
    }
}

fn load_config(common: &Common) -> Result<CliConfig> {
    match &common.config {
        Some(p) => CliConfig::load(p),
        None => Ok(CliConfig::default()),
    }
}

fn resolve_seed(flag: Option<u64>, section: Option<u64>) -> u64 {
    flag.or(section)
        .or_else(seed::env_seed)
        .unwrap_or(DEFAULT_SEED)
}

fn out_dir(common: &Common, cfg: &CliConfig) -> Result<PathBuf> {
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(|d| cfg.resolve(d)))
        .unwrap_or_else(|| PathBuf::from("netident-out"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn format(common: &Common, cfg: &CliConfig) -> OutputFormat {
    common.format.or(cfg.output.format).unwrap_or_default()
}

fn write(dir: &Path, name: &str, content: &str) -> Result<()> {
    fs::write(dir.join(name), content)?;
    Ok(())
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { common, t } => cmd_simulate(&common, t),
        Command::Estimate {
            common,
            data,
            method,
            lambda,
            delta,
        } => cmd_estimate(&common, data.as_deref(), method, lambda, delta.as_deref()),
        Command::Test {
            common,
            data,
            alpha,
            stat,
            critical,
            reps,
            df,
            delta,
            jobs,
        } => {
            let stat: StatKind = stat.parse()?;
            cmd_test(
                &common,
                data.as_deref(),
                alpha,
                stat,
                critical,
                reps,
                df,
                delta,
                jobs,
            )
        }
        Command::Spectra {
            common,
            matrix,
            family,
            n,
        } => cmd_spectra(&common, matrix.as_deref(), family, n),
        Command::Mc {
            common,
            kind,
            jobs,
            reps,
            null_reps,
        } => cmd_mc(&common, kind.as_deref(), jobs, reps, null_reps),
    }
}

pub fn path_to_jsonl(path: &SimPath) -> String {
    let mut s = String::new();
    for t in 0..path.len() {
        s.push_str(&json!({ "t": t + 1, "z": path.state(t) }).to_string());
        s.push('\n');
    }
    s
}

pub fn path_from_jsonl(text: &str) -> Result<SimPath> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Row {
        #[allow(dead_code)]
        t: usize,
        z: Vec<f64>,
    }
    let mut data = Vec::new();
    let mut rows = 0;
    let mut n = None;
    for (k, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
        let row: Row =
            serde_json::from_str(line).map_err(|e| Error::Parse(format!("line {}: {e}", k + 1)))?;
        if *n.get_or_insert(row.z.len()) != row.z.len() {
            return Err(Error::Parse(format!(
                "line {} has {} states, expected {}",
                k + 1,
                row.z.len(),
                n.unwrap()
            )));
        }
        data.extend(row.z);
        rows += 1;
    }
    let n = n.ok_or_else(|| Error::Parse("empty path file".into()))?;
    SimPath::from_states(DenseMatrix::new(rows, n, data)?)
}

fn read_path(p: &Path) -> Result<SimPath> {
    let text = fs::read_to_string(p)
        .map_err(|e| Error::Config(format!("cannot read data {}: {e}", p.display())))?;
    if p.extension().is_some_and(|e| e == "jsonl") {
        path_from_jsonl(&text)
    } else {
        path_from_csv(&text)
    }
}

/// Data from `--data`, or a fresh simulation of the config.
fn obtain_path(common: &Common, cfg: &CliConfig, data: Option<&Path>) -> Result<(SimPath, String)> {
    match data {
        Some(p) => {
            let path = read_path(p)?;
            let mut fp = Fingerprint::new("data");
            fp.matrix(&path.states);
            Ok((path, fp.hex()))
        }
        None if common.config.is_some() => {
            let s = resolve_seed(common.seed, cfg.dynamics.seed);
            let dcfg = cfg.dynamics_config(s)?;
            let t = cfg.dynamics.t.unwrap_or(200);
            let path = simulate(&dcfg, t)?;
            let fp = path.fingerprint.clone();
            Ok((path, fp))
        }
        None => Err(Error::Config("need --data or --config".into())),
    }
}

fn cmd_simulate(common: &Common, t_flag: Option<usize>) -> Result<()> {
    let cfg = load_config(common)?;
    if common.config.is_none() {
        return Err(Error::Config("simulate needs --config".into()));
    }
    let s = resolve_seed(common.seed, cfg.dynamics.seed);
    let t = t_flag.or(cfg.dynamics.t).unwrap_or(200);
    if t < 2 {
        return Err(Error::Config(format!("T must be >= 2, got {t}")));
    }
    let dcfg = cfg.dynamics_config(s)?;
    let path = simulate(&dcfg, t)?;
    let dir = out_dir(common, &cfg)?;
    match format(common, &cfg) {
        OutputFormat::Csv => write(&dir, "path.csv", &path_to_csv(&path))?,
        OutputFormat::Jsonl => write(&dir, "path.jsonl", &path_to_jsonl(&path))?,
    }
    write(&dir, "a_true.csv", &matrix_to_csv(&dcfg.a))?;
    let meta = json!({
        "command": "simulate",
        "version": VERSION,
        "fingerprint": path.fingerprint,
        "seed": s,
        "n": dcfg.n,
        "T": t,
        "delta": dcfg.delta,
        "link": dcfg.link.kind.to_string(),
        "burn_in": dcfg.burn_in,
    })
    .to_string();
    write(&dir, "simulate.jsonl", &(meta.clone() + "\n"))?;
    println!("{meta}");
    Ok(())
}

const PROFILE_GRID_STEP: f64 = 0.01;

fn cmd_estimate(
    common: &Common,
    data: Option<&Path>,
    method: Option<MethodArg>,
    lambda: Option<f64>,
    delta: Option<&str>,
) -> Result<()> {
    let cfg = load_config(common)?;
    let (path, data_fp) = obtain_path(common, &cfg, data)?;
    let link = cfg.link();
    let d_f = if link.kind == LinkKind::Identity && link.slope() == 1.0 {
        DenseMatrix::identity(path.n())
    } else {
        jacobian_on_path(&link, &path, LinearizationPoint::Mean)
    };
    let shock = cfg.dynamics.shock.unwrap_or_default();
    let m = sample_moments(&path, &shock)?;

    let (delta, delta_source) = match delta.map(str::trim) {
        Some("auto") => {
            let grid: Vec<f64> = (0..100).map(|k| k as f64 * PROFILE_GRID_STEP).collect();
            (profile_delta(&m, &d_f, &grid)?.delta, "profiled")
        }
        Some(s) => {
            let v: f64 = s.parse().map_err(|_| {
                Error::InvalidArgument(format!("--delta must be a number or 'auto', got '{s}'"))
            })?;
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!(
                    "delta must lie in [0,1), got {v}"
                )));
            }
            (v, "flag")
        }
        None => match cfg.dynamics.delta {
            Some(v) => (v, "config"),
            None => {
                return Err(Error::Config(
                    "need --delta (a number or 'auto') or [dynamics] delta".into(),
                ))
            }
        },
    };

    let method = method.unwrap_or(if lambda.is_some() {
        MethodArg::Lasso
    } else {
        MethodArg::Closed
    });
    let est: EstimateResult = match method {
        MethodArg::Closed => estimate_closed_form(&m, delta, &d_f)?,
        MethodArg::Gmm => estimate_gmm_two_step(&path, &shock, delta, &d_f)?,
        MethodArg::Lasso => {
            let lambda = lambda
                .ok_or_else(|| Error::InvalidArgument("--method lasso needs --lambda".into()))?;
            estimate_lasso(&m, delta, &d_f, lambda, LassoOptions::default())?
        }
    };

    let dir = out_dir(common, &cfg)?;
    write(&dir, "a_hat.csv", &matrix_to_csv(&est.a_hat))?;
    if let Some(v) = &est.variance {
        let n = path.n();
        let se = DenseMatrix::from_fn(n, n, |i, j| v[(j * n + i, j * n + i)].max(0.0).sqrt());
        write(&dir, "a_se.csv", &matrix_to_csv(&se))?;
    }
    let meta = json!({
        "command": "estimate",
        "version": VERSION,
        "data": data_fp,
        "method": est.method.name(),
        "lambda": est.method.lambda(),
        "delta": delta,
        "delta_source": delta_source,
        "objective": est.objective,
        "iterations": est.iterations,
        "converged": est.converged,
        "rank_deficient": est.rank_deficient,
        "nonzero": est.nonzero_count(),
        "n": path.n(),
        "T": path.len(),
    })
    .to_string();
    write(&dir, "estimate.jsonl", &(meta.clone() + "\n"))?;
    println!("{meta}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_test(
    common: &Common,
    data: Option<&Path>,
    alpha: f64,
    stat: StatKind,
    critical: CriticalArg,
    reps: usize,
    df: Option<usize>,
    delta: Option<f64>,
    jobs: usize,
) -> Result<()> {
    let cfg = load_config(common)?;
    let (path, _) = obtain_path(common, &cfg, data)?;
    let delta = delta
        .or(cfg.dynamics.delta)
        .ok_or_else(|| Error::Config("need --delta or [dynamics] delta".into()))?;
    let s = resolve_seed(common.seed, cfg.dynamics.seed);
    let shock = cfg.dynamics.shock.unwrap_or_default();
    let n = path.n();
    let opts = TestOptions {
        stat,
        source: match critical {
            CriticalArg::Chi2 => CriticalSource::ChiSquare {
                df: df.unwrap_or(n * n),
            },
            CriticalArg::Mc => CriticalSource::MonteCarlo { reps, seed: s },
        },
        alpha,
        shock,
        jobs,
    };
    let res = run_test(&path, delta, &opts)?;
    let line = res.to_jsonl();
    if common.out.is_some() || cfg.output.dir.is_some() {
        let dir = out_dir(common, &cfg)?;
        write(&dir, "test.jsonl", &(line.clone() + "\n"))?;
    }
    println!("{line}");
    Ok(())
}

fn cmd_spectra(
    common: &Common,
    matrix: Option<&Path>,
    family: Option<Family>,
    n: Option<usize>,
) -> Result<()> {
    let cfg = load_config(common)?;
    let a = if let Some(p) = matrix {
        let text = fs::read_to_string(p)
            .map_err(|e| Error::Config(format!("cannot read matrix {}: {e}", p.display())))?;
        matrix_from_csv(&text)?
    } else if let Some(f) = family {
        let s = resolve_seed(common.seed, None);
        let spec = NetworkSpec::calibrated(f, n.unwrap_or(25), s);
        spec.validate()?;
        generate(&spec)?
    } else if let Some(spec) = &cfg.network {
        generate(spec)?
    } else {
        return Err(Error::Config(
            "need --matrix, --family or a config with [network]".into(),
        ));
    };
    let summary = spectral_summary(&a)?;
    let line = serde_json::to_string(&summary).map_err(|e| Error::Parse(e.to_string()))?;
    if common.out.is_some() || cfg.output.dir.is_some() {
        let dir = out_dir(common, &cfg)?;
        write(&dir, "spectra.jsonl", &(line.clone() + "\n"))?;
    }
    println!("{line}");
    Ok(())
}

pub fn records_jsonl(out: &ExperimentOutput) -> String {
    let mut s = String::new();
    s.push_str(&json!({ "version": VERSION, "config": out.fingerprint }).to_string());
    s.push('\n');
    for r in &out.records {
        let line = json!({
            "kind": r.label, "n": r.n, "T": r.t, "rep": r.rep, "seed": r.seed,
            "reject": r.reject, "stat": r.stat, "fro_error": r.fro_error,
            "spec_error": r.spec_error, "bias": r.bias, "rmse": r.rmse, "error": r.error,
        });
        s.push_str(&line.to_string());
        s.push('\n');
    }
    s
}

fn cmd_mc(
    common: &Common,
    kind: Option<&str>,
    jobs: usize,
    reps: Option<usize>,
    null_reps: Option<usize>,
) -> Result<()> {
    let cfg = load_config(common)?;
    let kind = kind.map(str::parse::<ExperimentKind>).transpose()?;
    let section_seed = cfg.experiment.as_ref().and_then(|e| e.seed);
    let mut exp = cfg.experiment_config(kind, resolve_seed(common.seed, section_seed))?;
    if let Some(r) = reps {
        exp.reps = r;
    }
    if let Some(r) = null_reps {
        exp.null_reps = r;
    }
    let out = run_experiment(&exp, jobs)?;
    let dir = out_dir(common, &cfg)?;
    match format(common, &cfg) {
        OutputFormat::Csv => write(&dir, "records.csv", &records_csv(&out))?,
        OutputFormat::Jsonl => write(&dir, "records.jsonl", &records_jsonl(&out))?,
    }
    let summary = summary_csv(&out);
    write(&dir, "summary.csv", &summary)?;
    write(&dir, "plot.csv", &plot_csv(&out))?;
    print!("{summary}");
    if out.summary.failed > 0 {
        eprintln!(
            "netident: {} replication(s) failed and were excluded",
            out.summary.failed
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_named() {
        let err = CliConfig::parse("[dynamics]\ndelta = 0.5\nbogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = CliConfig::parse("[network]\nfamily = \"chain\"\nn = 5\nwieght_scale = 1\n")
            .unwrap_err();
        assert!(err.to_string().contains("wieght_scale"), "{err}");
    }

    #[test]
    fn ranges_are_checked_at_parse_time() {
        assert!(matches!(
            CliConfig::parse("[dynamics]\ndelta = 1.5\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            CliConfig::parse("[experiment]\nalpha = 0\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            CliConfig::parse("[experiment]\nnull_reps = 10\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            CliConfig::parse("[network]\nfamily = \"block\"\nn = 7\nblocks = 3\n"),
            Err(Error::Config(_))
        ));
        assert!(CliConfig::parse("[dynamics]\ndelta = 0.5\nT = 100\n").is_ok());
    }

    #[test]
    fn experiment_overlay() {
        let cfg = CliConfig::parse(
            "[experiment]\nkind = \"local\"\nc = 2.0\nn = [10]\nT = [40, 80]\nreps = 7\n[dynamics]\ndelta = 0.5\n",
        )
        .unwrap();
        let e = cfg.experiment_config(None, 3).unwrap();
        assert_eq!(e.kind, ExperimentKind::LocalAlternative { c: 2.0 });
        assert_eq!(e.grid, vec![(10, 40), (10, 80)]);
        assert_eq!(e.reps, 7);
        assert_eq!(e.delta, 0.5);
        assert_eq!(e.master_seed, 3);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(
            exit_code(&Error::Explosion {
                step: 1,
                max_abs: 1e9
            }),
            3
        );
        assert_eq!(exit_code(&Error::Singular { rcond: 0.0 }), 4);
    }

    #[test]
    fn jsonl_path_roundtrip() {
        let p = SimPath::from_states(
            DenseMatrix::from_rows(&[vec![1.0, -2.5], vec![0.1, 3.0]]).unwrap(),
        )
        .unwrap();
        let back = path_from_jsonl(&path_to_jsonl(&p)).unwrap();
        assert_eq!(back.states, p.states);
    }
}
