//! Testing `H₀: A = 0` through the deviation matrix `Δ̂ = Γ̂₁ − (1−δ)Γ̂₀`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::gamma_ur;

use crate::dynamics::{simulate, AggregateShock, DynamicsConfig, SimPath};
use crate::error::{Error, Result};
use crate::estimation::{sample_moments, MomentSet};
use crate::linalg::{spectral_abs_max, DenseMatrix};
use crate::montecarlo::par_map;
use crate::seed;

/// `Δ̂ = Γ̂₁ − (1−δ)Γ̂₀`; zero under the null.
pub fn deviation_matrix(m: &MomentSet, delta: f64) -> DenseMatrix {
    &m.gamma1 - &m.gamma0.scale(1.0 - delta)
}

/// `T_n = ‖Δ̂‖_F²`.
pub fn statistic_frobenius(d: &DenseMatrix) -> f64 {
    d.as_slice().iter().map(|x| x * x).sum()
}

/// `S_n = max_k |λ_k(Δ̂)|`, eigenvalues of `Δ̂` itself (not its symmetric
/// part, and not singular values).
pub fn statistic_spectral(d: &DenseMatrix) -> Result<f64> {
    spectral_abs_max(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StatKind {
    #[default]
    Fro,
    Spec,
}

impl StatKind {
    pub fn compute(self, d: &DenseMatrix) -> Result<f64> {
        match self {
            StatKind::Fro => Ok(statistic_frobenius(d)),
            StatKind::Spec => statistic_spectral(d),
        }
    }
}

impl FromStr for StatKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fro" | "frobenius" => Ok(StatKind::Fro),
            "spec" | "spectral" => Ok(StatKind::Spec),
            other => Err(Error::InvalidArgument(format!(
                "unknown statistic '{other}' (use fro or spec)"
            ))),
        }
    }
}

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StatKind::Fro => "fro",
            StatKind::Spec => "spec",
        })
    }
}

/// Upper tail of `χ²_df` at `T · stat`, via the regularized upper
/// incomplete gamma function `Q(df/2, T·stat/2)`.
pub fn chi_square_pvalue(stat: f64, t_len: usize, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::InvalidArgument(
            "chi-square degrees of freedom must be >= 1".into(),
        ));
    }
    if !(stat >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "statistic must be >= 0, got {stat}"
        )));
    }
    let x = t_len as f64 * stat;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0))
}

/// Rejection threshold for `T_n` at level `alpha` under the `χ²_df` limit.
pub fn chi_square_critical(t_len: usize, df: usize, alpha: f64) -> Result<f64> {
    let dist = ChiSquared::new(df as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(dist.inverse_cdf(1.0 - alpha) / t_len as f64)
}

/// Index (1-based) of the `(1−α)` order statistic among `reps` draws.
pub fn quantile_rank(alpha: f64, reps: usize) -> usize {
    let k = ((1.0 - alpha) * reps as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(reps)
}

#[derive(Debug, Clone)]
pub struct NullDistribution {
    /// Sorted ascending.
    pub draws: Vec<f64>,
    pub critical_value: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl NullDistribution {
    /// `(1 + #{draws ≥ stat}) / (reps + 1)`.
    pub fn p_value(&self, stat: f64) -> f64 {
        let ge = self.draws.len() - self.draws.partition_point(|&d| d < stat);
        (1 + ge) as f64 / (self.draws.len() + 1) as f64
    }
}

/// Null reference by simulation: `reps` independent paths from `null_cfg`
/// (which must have `A = 0`), each reduced to the chosen statistic. The
/// critical value is the `⌈(1−α)·reps⌉`-th smallest draw.
pub fn mc_critical_value(
    null_cfg: &DynamicsConfig,
    t_len: usize,
    kind: StatKind,
    alpha: f64,
    reps: usize,
    seed: u64,
    jobs: usize,
) -> Result<NullDistribution> {
    if null_cfg.a.max_abs() != 0.0 {
        return Err(Error::InvalidArgument(
            "the null configuration must have A = 0".into(),
        ));
    }
    if reps < 100 {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo critical values need reps >= 100, got {reps}"
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0,1], got {alpha}"
        )));
    }
    let draws: Vec<Result<f64>> = par_map(jobs, reps, |r| {
        let mut cfg = null_cfg.clone();
        cfg.seed = seed::derive(&[seed::tag("null-draw"), seed, r as u64]);
        let path = simulate(&cfg, t_len)?;
        let m = sample_moments(&path, &AggregateShock::None)?;
        kind.compute(&deviation_matrix(&m, cfg.delta))
    });
    let mut draws: Vec<f64> = draws.into_iter().collect::<Result<_>>()?;
    draws.sort_by(f64::total_cmp);
    let critical_value = draws[quantile_rank(alpha, reps) - 1];
    Ok(NullDistribution {
        draws,
        critical_value,
        alpha,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CriticalSource {
    ChiSquare { df: usize },
    MonteCarlo { reps: usize, seed: u64 },
}

impl fmt::Display for CriticalSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CriticalSource::ChiSquare { df } => write!(f, "chi2(df={df})"),
            CriticalSource::MonteCarlo { reps, .. } => write!(f, "mc(reps={reps})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestOptions {
    pub stat: StatKind,
    pub source: CriticalSource,
    pub alpha: f64,
    pub shock: AggregateShock,
    pub jobs: usize,
}

impl TestOptions {
    /// Frobenius statistic against 500 simulated null draws.
    pub fn monte_carlo(alpha: f64, seed: u64) -> Self {
        Self {
            stat: StatKind::Fro,
            source: CriticalSource::MonteCarlo { reps: 500, seed },
            alpha,
            shock: AggregateShock::None,
            jobs: 1,
        }
    }

    pub fn chi_square(alpha: f64, df: usize) -> Self {
        Self {
            stat: StatKind::Fro,
            source: CriticalSource::ChiSquare { df },
            alpha,
            shock: AggregateShock::None,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub stat_fro: f64,
    pub stat_spec: f64,
    pub statistic: StatKind,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub source: CriticalSource,
}

impl TestResult {
    pub fn selected(&self) -> f64 {
        match self.statistic {
            StatKind::Fro => self.stat_fro,
            StatKind::Spec => self.stat_spec,
        }
    }

    /// One JSON object on a single line.
    pub fn to_jsonl(&self) -> String {
        let seed = match self.source {
            CriticalSource::MonteCarlo { seed, .. } => serde_json::Value::from(seed),
            CriticalSource::ChiSquare { .. } => serde_json::Value::Null,
        };
        serde_json::json!({
            "stat_fro": self.stat_fro,
            "stat_spec": self.stat_spec,
            "statistic": self.statistic,
            "critical_value": self.critical_value,
            "p_value": self.p_value,
            "reject": self.reject,
            "alpha": self.alpha,
            "source": self.source.to_string(),
            "seed": seed,
        })
        .to_string()
    }
}

/// Null configuration matched to an observed path: `A = 0`, the same δ, and
/// `Ω = σ̂²I` with `σ̂² = v̄·(1 − (1−δ)²)` where `v̄` is the average marginal
/// variance, so the simulated null has the observed scale.
pub fn matched_null_config(m: &MomentSet, delta: f64, seed: u64) -> DynamicsConfig {
    let n = m.n();
    let vbar = m.gamma0.trace() / n as f64;
    let phi = 1.0 - delta;
    let sigma2 = (vbar * (1.0 - phi * phi)).max(f64::MIN_POSITIVE);
    DynamicsConfig::linear(DenseMatrix::zeros(n, n), delta, sigma2.sqrt(), seed)
}

/// Computes both statistics and decides on the configured one.
pub fn run_test(path: &SimPath, delta: f64, opts: &TestOptions) -> Result<TestResult> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0,1), got {}",
            opts.alpha
        )));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in [0,1], got {delta}"
        )));
    }
    let m = sample_moments(path, &opts.shock)?;
    let d = deviation_matrix(&m, delta);
    let stat_fro = statistic_frobenius(&d);
    let stat_spec = statistic_spectral(&d)?;
    let chosen = match opts.stat {
        StatKind::Fro => stat_fro,
        StatKind::Spec => stat_spec,
    };
    let (critical_value, p_value) = match opts.source {
        CriticalSource::ChiSquare { df } => {
            if opts.stat != StatKind::Fro {
                return Err(Error::InvalidArgument(
                    "the chi-square reference applies to the Frobenius statistic only".into(),
                ));
            }
            (
                chi_square_critical(path.len(), df, opts.alpha)?,
                chi_square_pvalue(stat_fro, path.len(), df)?,
            )
        }
        CriticalSource::MonteCarlo { reps, seed } => {
            let null_cfg = matched_null_config(&m, delta, seed);
            let null = mc_critical_value(
                &null_cfg,
                path.len(),
                opts.stat,
                opts.alpha,
                reps,
                seed,
                opts.jobs,
            )?;
            (null.critical_value, null.p_value(chosen))
        }
    };
    Ok(TestResult {
        stat_fro,
        stat_spec,
        statistic: opts.stat,
        critical_value,
        p_value,
        reject: chosen > critical_value,
        alpha: opts.alpha,
        source: opts.source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{implied_covariances, operator_from};
    use proptest::prelude::*;

    #[test]
    fn deviation_examples() {
        let g0 = DenseMatrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 2.0]]).unwrap();
        let m = MomentSet::population(g0.clone(), g0.scale(0.6)).unwrap();
        assert!(deviation_matrix(&m, 0.4).max_abs() < 1e-15);
        let g1 = DenseMatrix::from_rows(&[vec![0.3, 0.1], vec![-0.2, 0.5]]).unwrap();
        let m = MomentSet::population(g0, g1.clone()).unwrap();
        assert_eq!(deviation_matrix(&m, 1.0), g1);

        // Γ̂₀ = I and Γ̂₁ = B give Δ̂ = A·D_f
        let a = DenseMatrix::from_rows(&[vec![0.0, 0.3], vec![0.1, 0.0]]).unwrap();
        let d = DenseMatrix::from_diag(&[0.5, 2.0]);
        let b = operator_from(&a, 0.25, &d).unwrap();
        let m = MomentSet::population(DenseMatrix::identity(2), b).unwrap();
        assert!((&deviation_matrix(&m, 0.25) - &(&a * &d)).max_abs() < 1e-15);
    }

    #[test]
    fn statistic_examples() {
        assert_eq!(statistic_frobenius(&DenseMatrix::zeros(3, 3)), 0.0);
        assert_eq!(statistic_frobenius(&DenseMatrix::identity(2)), 2.0);
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!((statistic_frobenius(&m) - 30.0).abs() < 1e-12);
        assert_eq!(statistic_spectral(&DenseMatrix::zeros(2, 2)).unwrap(), 0.0);
        assert!(
            (statistic_spectral(&DenseMatrix::identity(3).scale(0.3)).unwrap() - 0.3).abs() < 1e-15
        );
        let nil = DenseMatrix::from_rows(&[vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(statistic_spectral(&nil).unwrap(), 0.0);
    }

    #[test]
    fn chi_square_examples() {
        assert_eq!(chi_square_pvalue(0.0, 100, 4).unwrap(), 1.0);
        // χ²₂ has median 2 ln 2; stat·T = 2 ln 2 with T = 1
        assert!((chi_square_pvalue(2.0 * 2f64.ln(), 1, 2).unwrap() - 0.5).abs() < 1e-12);
        assert!(chi_square_pvalue(1e3, 100, 4).unwrap() < 1e-12);
        assert!(chi_square_pvalue(1.0, 10, 0).is_err());
        // χ²₂ tail is e^{−x/2} exactly
        for x in [0.1, 1.0, 5.0, 30.0] {
            let p = chi_square_pvalue(x, 1, 2).unwrap();
            assert!((p - (-x / 2.0f64).exp()).abs() < 1e-10);
        }
        let cv = chi_square_critical(1, 2, 0.5).unwrap();
        assert!((cv - 2.0 * 2f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn quantile_rank_examples() {
        assert_eq!(quantile_rank(0.05, 500), 475);
        assert_eq!(quantile_rank(0.05, 100), 95);
        assert_eq!(quantile_rank(1.0, 100), 1);
        assert_eq!(quantile_rank(0.0, 100), 100);
    }

    fn null_cfg(n: usize) -> DynamicsConfig {
        DynamicsConfig::linear(DenseMatrix::zeros(n, n), 0.6, 1.0, 0).with_burn_in(100)
    }

    #[test]
    fn alpha_one_returns_minimum() {
        let null = mc_critical_value(&null_cfg(3), 50, StatKind::Fro, 1.0, 100, 7, 2).unwrap();
        assert_eq!(null.critical_value, null.draws[0]);
    }

    #[test]
    fn mc_rejects_bad_arguments() {
        assert!(mc_critical_value(&null_cfg(3), 50, StatKind::Fro, 0.05, 99, 7, 1).is_err());
        let mut cfg = null_cfg(3);
        cfg.a[(0, 1)] = 0.1;
        assert!(mc_critical_value(&cfg, 50, StatKind::Fro, 0.05, 100, 7, 1).is_err());
    }

    #[test]
    fn split_half_quantiles_agree() {
        let reps = 2000;
        let a = mc_critical_value(&null_cfg(4), 100, StatKind::Fro, 0.1, reps, 1, 4).unwrap();
        let b = mc_critical_value(&null_cfg(4), 100, StatKind::Fro, 0.1, reps, 2, 4).unwrap();
        // standard error of a sample quantile from the order-statistic spread
        let lo = a.draws[quantile_rank(0.1, reps) - 1 - 27];
        let hi = a.draws[quantile_rank(0.1, reps) - 1 + 27];
        let se = (hi - lo) / 2.0;
        assert!((a.critical_value - b.critical_value).abs() <= 3.0 * se * 2f64.sqrt());
    }

    #[test]
    fn p_value_counts_ties_and_bounds() {
        let null = NullDistribution {
            draws: vec![1.0, 2.0, 3.0, 4.0],
            critical_value: 4.0,
            alpha: 0.05,
            seed: 0,
        };
        assert_eq!(null.p_value(10.0), 0.2);
        assert_eq!(null.p_value(3.0), 0.6);
        assert_eq!(null.p_value(0.0), 1.0);
    }

    #[test]
    fn exact_null_never_rejects() {
        let g0 = DenseMatrix::from_rows(&[vec![1.5, 0.1], vec![0.1, 1.2]]).unwrap();
        let pop = MomentSet::population(g0.clone(), g0.scale(0.4)).unwrap();
        let d = deviation_matrix(&pop, 0.6);
        let (fro, spec) = (statistic_frobenius(&d), statistic_spectral(&d).unwrap());
        assert_eq!((fro, spec), (0.0, 0.0));
        assert_eq!(chi_square_pvalue(fro, 1000, 4).unwrap(), 1.0);
        // simulated null draws are nonnegative, so a zero statistic never exceeds them
        let null = mc_critical_value(&null_cfg(2), 50, StatKind::Fro, 0.05, 100, 3, 1).unwrap();
        assert!(null.draws[0] >= 0.0);
        assert!(!(fro > null.critical_value));
        assert_eq!(null.p_value(fro), 1.0);
    }

    #[test]
    fn chi_square_only_for_frobenius() {
        let path = simulate(&null_cfg(2), 40).unwrap();
        let mut opts = TestOptions::chi_square(0.05, 4);
        opts.stat = StatKind::Spec;
        assert!(run_test(&path, 0.6, &opts).is_err());
    }

    #[test]
    fn strong_alternative_rejects_and_jsonl_echoes_alpha() {
        let n = 5;
        let a = DenseMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { 0.25 } else { 0.0 });
        let cfg = DynamicsConfig::linear(a, 0.6, 1.0, 12);
        let path = simulate(&cfg, 400).unwrap();
        let res = run_test(&path, 0.6, &TestOptions::monte_carlo(0.05, 5)).unwrap();
        assert!(res.reject);
        let line = res.to_jsonl();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["alpha"], 0.05);
        assert_eq!(v["source"], "mc(reps=500)");
        for key in [
            "stat_fro",
            "stat_spec",
            "critical_value",
            "p_value",
            "reject",
            "seed",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn spectral_statistic_on_population_moments_is_radius_of_a_df() {
        // with Ω chosen so that Γ₀ = I, Δ = A·D_f exactly
        let a = DenseMatrix::from_rows(&[
            vec![0.0, 0.3, 0.1],
            vec![0.2, 0.0, -0.2],
            vec![0.1, 0.1, 0.0],
        ])
        .unwrap();
        let d = DenseMatrix::from_diag(&[1.0, 0.8, 1.2]);
        let b = operator_from(&a, 0.6, &d).unwrap();
        let omega = &DenseMatrix::identity(3) - &(&b * &b.transpose());
        let (g0, g1) = implied_covariances(&b, &omega).unwrap();
        assert!((&g0 - &DenseMatrix::identity(3)).max_abs() < 1e-12);
        let m = MomentSet::population(g0, g1).unwrap();
        let s = statistic_spectral(&deviation_matrix(&m, 0.6)).unwrap();
        let want = spectral_abs_max(&(&a * &d)).unwrap();
        assert!((s - want).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn statistics_scale_homogeneously(vals in prop::collection::vec(-2.0f64..2.0, 9), c in -3.0f64..3.0) {
            let d = DenseMatrix::from_fn(3, 3, |i, j| vals[i * 3 + j]);
            let f = statistic_frobenius(&d);
            let fc = statistic_frobenius(&d.scale(c));
            prop_assert!((fc - c * c * f).abs() <= 1e-12 * (1.0 + fc.abs()));
            let s = statistic_spectral(&d).unwrap();
            let sc = statistic_spectral(&d.scale(c)).unwrap();
            prop_assert!((sc - c.abs() * s).abs() <= 1e-9 * (1.0 + sc));
        }

        #[test]
        fn chi_square_pvalue_is_a_probability_and_monotone(x in 0.0f64..50.0, dx in 0.0f64..10.0, df in 1usize..30) {
            let p1 = chi_square_pvalue(x, 1, df).unwrap();
            let p2 = chi_square_pvalue(x + dx, 1, df).unwrap();
            prop_assert!((0.0..=1.0).contains(&p1));
            prop_assert!(p2 <= p1 + 1e-15);
        }
    }
}
