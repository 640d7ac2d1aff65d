//! Interaction-matrix families and their spectral diagnostics.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, matrix_inverse, DenseMatrix};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Sparse,
    Hub,
    Block,
    Chain,
    Complete,
    #[serde(rename = "rank1", alias = "rankone")]
    RankOne,
    Star,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Sparse,
        Family::Hub,
        Family::Block,
        Family::Chain,
        Family::Complete,
        Family::RankOne,
        Family::Star,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Sparse => "sparse",
            Family::Hub => "hub",
            Family::Block => "block",
            Family::Chain => "chain",
            Family::Complete => "complete",
            Family::RankOne => "rank1",
            Family::Star => "star",
        }
    }

    /// Dispersion targets used for the heterogeneity study. These order the
    /// regular families from least to most spectrally dispersed.
    pub fn calibrated_dispersion(self) -> Option<f64> {
        match self {
            Family::Sparse => Some(1.12),
            Family::Hub => Some(1.25),
            Family::Block => Some(1.31),
            Family::Chain => Some(1.78),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sparse" => Ok(Family::Sparse),
            "hub" => Ok(Family::Hub),
            "block" => Ok(Family::Block),
            "chain" => Ok(Family::Chain),
            "complete" => Ok(Family::Complete),
            "rank1" | "rankone" | "rank-1" => Ok(Family::RankOne),
            "star" => Ok(Family::Star),
            other => Err(Error::Spec(format!("unknown network family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub family: Family,
    pub n: usize,
    /// Edge probability per unordered pair (Sparse). Defaults to `3/n`.
    #[serde(default)]
    pub density: Option<f64>,
    /// Number of equal blocks (Block). Defaults to the divisor of `n`
    /// nearest `n/5`.
    #[serde(default)]
    pub blocks: Option<usize>,
    #[serde(default = "one")]
    pub weight_scale: f64,
    #[serde(default)]
    pub target_radius: Option<f64>,
    /// Rescale so the real-part eigenvalue variance equals this value.
    #[serde(default)]
    pub target_dispersion: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl NetworkSpec {
    pub fn new(family: Family, n: usize) -> Self {
        Self {
            family,
            n,
            density: None,
            blocks: None,
            weight_scale: 1.0,
            target_radius: None,
            target_dispersion: None,
            seed: 0,
        }
    }

    /// The family at its calibrated dispersion, if it has one.
    pub fn calibrated(family: Family, n: usize, seed: u64) -> Self {
        Self {
            target_dispersion: family.calibrated_dispersion(),
            ..Self::new(family, n).with_seed(seed)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_weight(mut self, w: f64) -> Self {
        self.weight_scale = w;
        self
    }

    pub fn with_density(mut self, p: f64) -> Self {
        self.density = Some(p);
        self
    }

    pub fn with_blocks(mut self, b: usize) -> Self {
        self.blocks = Some(b);
        self
    }

    pub fn with_target_radius(mut self, r: f64) -> Self {
        self.target_radius = Some(r);
        self
    }

    pub fn with_target_dispersion(mut self, d: f64) -> Self {
        self.target_dispersion = Some(d);
        self
    }

    pub fn effective_density(&self) -> f64 {
        self.density
            .unwrap_or_else(|| (3.0 / self.n as f64).min(1.0))
    }

    pub fn effective_blocks(&self) -> usize {
        self.blocks.unwrap_or_else(|| default_blocks(self.n))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Spec(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.weight_scale.is_finite() && self.weight_scale > 0.0) {
            return Err(Error::Spec(format!(
                "weight_scale must be positive, got {}",
                self.weight_scale
            )));
        }
        if let Some(p) = self.density {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Spec(format!("density must lie in [0,1], got {p}")));
            }
        }
        if self.family == Family::Block {
            let b = self.effective_blocks();
            if b == 0 || !self.n.is_multiple_of(b) {
                return Err(Error::Spec(format!(
                    "blocks = {b} does not divide n = {}",
                    self.n
                )));
            }
        }
        if let Some(r) = self.target_radius {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Spec(format!(
                    "target_radius must lie in (0,1), got {r}"
                )));
            }
        }
        if let Some(d) = self.target_dispersion {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Spec(format!(
                    "target_dispersion must be positive, got {d}"
                )));
            }
        }
        if self.target_radius.is_some() && self.target_dispersion.is_some() {
            return Err(Error::Spec(
                "target_radius and target_dispersion are mutually exclusive".into(),
            ));
        }
        Ok(())
    }
}

fn default_blocks(n: usize) -> usize {
    let want = (n as f64 / 5.0).max(1.0);
    (1..=n)
        .filter(|d| n.is_multiple_of(*d))
        .min_by(|a, b| {
            let da = (*a as f64 - want).abs();
            let db = (*b as f64 - want).abs();
            da.total_cmp(&db)
        })
        .unwrap_or(1)
}

pub fn generate(spec: &NetworkSpec) -> Result<DenseMatrix> {
    spec.validate()?;
    let n = spec.n;
    let w = spec.weight_scale;
    let mut rng = seed::rng(seed::derive(&[seed::tag("network"), spec.seed]));
    let mut a = DenseMatrix::zeros(n, n);
    match spec.family {
        Family::Sparse => {
            let p = spec.effective_density();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < p {
                        a[(i, j)] = w;
                        a[(j, i)] = w;
                    }
                }
            }
        }
        Family::Hub | Family::Star => {
            let hub = if spec.family == Family::Hub {
                rng.random_range(0..n)
            } else {
                0
            };
            for j in (0..n).filter(|&j| j != hub) {
                a[(hub, j)] = w;
                a[(j, hub)] = w;
            }
        }
        Family::Block => {
            let size = n / spec.effective_blocks();
            for i in 0..n {
                for j in 0..n {
                    if i != j && i / size == j / size {
                        a[(i, j)] = w;
                    }
                }
            }
        }
        Family::Chain => {
            for i in 0..n - 1 {
                a[(i, i + 1)] = w;
                a[(i + 1, i)] = w;
            }
        }
        Family::Complete => {
            a = DenseMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { w });
        }
        Family::RankOne => {
            let v = rank_one_vector(n, &mut rng);
            a = DenseMatrix::outer(&v, &v).scale(w);
            for i in 0..n {
                a[(i, i)] = 0.0;
            }
        }
    }

    if let Some(r) = spec.target_radius {
        a = rescale_to_radius(&a, r)?;
    } else if let Some(d) = spec.target_dispersion {
        let current = spectral_summary(&a)?.dispersion;
        if current <= 0.0 {
            return Err(Error::Spec(
                "cannot rescale a matrix with zero spectral dispersion".into(),
            ));
        }
        a = a.scale((d / current).sqrt());
    }
    Ok(a)
}

/// Positive weight vector for the rank-one family: `1 + 0.1(u − 1/2)`.
fn rank_one_vector(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n)
        .map(|_| 1.0 + 0.1 * (rng.random::<f64>() - 0.5))
        .collect()
}

/// `A · r / ρ(A)`. Fails on a matrix with zero spectral radius.
pub fn rescale_to_radius(a: &DenseMatrix, r: f64) -> Result<DenseMatrix> {
    let radius = crate::linalg::spectral_radius(a)?;
    if radius <= 0.0 {
        return Err(Error::Spec(
            "cannot rescale a matrix with zero spectral radius".into(),
        ));
    }
    Ok(a.scale(r / radius))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralSummary {
    pub dispersion: f64,
    pub range: f64,
    pub radius: f64,
    #[serde(serialize_with = "serialize_complex")]
    pub eigenvalues: Vec<Complex64>,
}

fn serialize_complex<S: serde::Serializer>(
    v: &[Complex64],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for c in v {
        seq.serialize_element(&[c.re, c.im])?;
    }
    seq.end()
}

/// Population variance of the real parts of the eigenvalues.
pub fn dispersion(eigs: &[Complex64]) -> f64 {
    let n = eigs.len() as f64;
    let mean = eigs.iter().map(|l| l.re).sum::<f64>() / n;
    eigs.iter().map(|l| (l.re - mean).powi(2)).sum::<f64>() / n
}

pub fn spectral_summary(a: &DenseMatrix) -> Result<SpectralSummary> {
    let eigs = eigenvalues(a)?;
    let (lo, hi) = eigs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| {
            (lo.min(l.re), hi.max(l.re))
        });
    Ok(SpectralSummary {
        dispersion: dispersion(&eigs),
        range: hi - lo,
        radius: eigs.iter().map(|l| l.norm()).fold(0.0, f64::max),
        eigenvalues: eigs,
    })
}

/// Uniform random permutation of `0..n` (Fisher–Yates).
pub fn random_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed::derive(&[seed::tag("permute"), seed]));
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut rng);
    p
}

/// `P A P'` where `P` maps unit `i` to position `perm[i]`.
pub fn permute_with(a: &DenseMatrix, perm: &[usize]) -> Result<DenseMatrix> {
    let n = a.require_square("permutation input")?;
    if perm.len() != n {
        return Err(Error::dim(format!(
            "permutation of length {} for n = {n}",
            perm.len()
        )));
    }
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(perm[i], perm[j])] = a[(i, j)];
        }
    }
    Ok(out)
}

pub fn permute_similar(a: &DenseMatrix, seed: u64) -> Result<DenseMatrix> {
    let n = a.require_square("permutation input")?;
    permute_with(a, &random_permutation(n, seed))
}

/// `Q A Q⁻¹`.
pub fn similarity_transform(a: &DenseMatrix, q: &DenseMatrix) -> Result<DenseMatrix> {
    let qinv = matrix_inverse(q)?;
    q.matmul(a)?.matmul(&qinv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matching::matched_max_distance;
    use proptest::prelude::*;

    fn sorted_re(a: &DenseMatrix) -> Vec<f64> {
        let mut v: Vec<f64> = eigenvalues(a).unwrap().iter().map(|l| l.re).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn complete_three_spectrum() {
        let a = generate(&NetworkSpec::new(Family::Complete, 3)).unwrap();
        assert_eq!(
            a,
            DenseMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 })
        );
        let ev = sorted_re(&a);
        for (got, want) in ev.iter().zip([-1.0, -1.0, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_two() {
        let a = generate(&NetworkSpec::new(Family::Chain, 2).with_weight(0.3)).unwrap();
        assert_eq!(
            a,
            DenseMatrix::from_rows(&[vec![0.0, 0.3], vec![0.3, 0.0]]).unwrap()
        );
        let ev = sorted_re(&a);
        assert!((ev[0] + 0.3).abs() < 1e-14 && (ev[1] - 0.3).abs() < 1e-14);
    }

    #[test]
    fn star_four_spectrum() {
        let w = 0.4;
        let a = generate(&NetworkSpec::new(Family::Star, 4).with_weight(w)).unwrap();
        let ev = sorted_re(&a);
        let s = w * 3f64.sqrt();
        let want = [-s, 0.0, 0.0, s];
        for (got, want) in ev.iter().zip(want) {
            assert!((got - want).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn dispersion_examples() {
        let s = spectral_summary(&DenseMatrix::identity(4).scale(0.3)).unwrap();
        assert!(s.dispersion.abs() < 1e-15);
        let pm = DenseMatrix::from_diag(&[1.0, -1.0]);
        let s = spectral_summary(&pm).unwrap();
        assert!((s.dispersion - 1.0).abs() < 1e-15);
        assert!((s.range - 2.0).abs() < 1e-15);
        assert!((s.radius - 1.0).abs() < 1e-15);
    }

    #[test]
    fn calibrated_dispersion_is_hit_and_ordered() {
        let n = 25;
        let d: Vec<f64> = [Family::Sparse, Family::Hub, Family::Block, Family::Chain]
            .iter()
            .map(|&f| {
                spectral_summary(&generate(&NetworkSpec::calibrated(f, n, 7)).unwrap())
                    .unwrap()
                    .dispersion
            })
            .collect();
        assert!((d[3] - 1.78).abs() < 1e-10);
        assert!((d[0] - 1.12).abs() < 1e-10);
        assert!(d.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rank_one_is_rank_one_before_zeroing() {
        let mut rng = seed::rng(3);
        let v = rank_one_vector(8, &mut rng);
        let outer = DenseMatrix::outer(&v, &v);
        // every 2x2 minor vanishes
        for i in 0..7 {
            for j in 0..7 {
                let minor =
                    outer[(i, j)] * outer[(i + 1, j + 1)] - outer[(i, j + 1)] * outer[(i + 1, j)];
                assert!(minor.abs() < 1e-12);
            }
        }
        assert!(v.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn block_default_and_validation() {
        let a = generate(&NetworkSpec::new(Family::Block, 25)).unwrap();
        assert_eq!(a.count_nonzero(0.0), 5 * 5 * 4);
        assert!(matches!(
            generate(&NetworkSpec::new(Family::Block, 10).with_blocks(3)),
            Err(Error::Spec(_))
        ));
        assert!(matches!(
            generate(&NetworkSpec::new(Family::Chain, 1)),
            Err(Error::Spec(_))
        ));
        assert!(matches!(
            generate(&NetworkSpec::new(Family::Sparse, 5).with_density(1.5)),
            Err(Error::Spec(_))
        ));
    }

    #[test]
    fn zero_radius_cannot_be_rescaled() {
        let spec = NetworkSpec::new(Family::Sparse, 6)
            .with_density(0.0)
            .with_target_radius(0.5);
        assert!(matches!(generate(&spec), Err(Error::Spec(_))));
    }

    #[test]
    fn permutation_identity_cases() {
        let a = DenseMatrix::from_rows(&[vec![2.5]]).unwrap();
        assert_eq!(permute_similar(&a, 9).unwrap(), a);
        let b = DenseMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64);
        assert_eq!(permute_with(&b, &[0, 1, 2]).unwrap(), b);
    }

    #[test]
    fn diagonal_similarity_closed_form() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let q = DenseMatrix::from_diag(&[1.0, 2.0]);
        // (QAQ⁻¹)_ij = q_i a_ij / q_j
        let want = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![6.0, 4.0]]).unwrap();
        assert!((&similarity_transform(&a, &q).unwrap() - &want).max_abs() < 1e-14);
        assert_eq!(
            similarity_transform(&a, &DenseMatrix::identity(2)).unwrap(),
            a
        );
        assert!(matches!(
            similarity_transform(&a, &DenseMatrix::zeros(2, 2)),
            Err(Error::Singular { .. })
        ));
    }

    fn family_strategy() -> impl Strategy<Value = Family> {
        prop::sample::select(Family::ALL.to_vec())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn generation_is_deterministic_with_zero_diagonal(fam in family_strategy(), n in 2usize..16, s in any::<u64>()) {
            let mut spec = NetworkSpec::new(fam, n).with_seed(s).with_weight(0.7);
            if fam == Family::Block { spec = spec.with_blocks(1); }
            let a = generate(&spec).unwrap();
            let b = generate(&spec).unwrap();
            prop_assert_eq!(a.as_slice(), b.as_slice());
            prop_assert!(a.diag().iter().all(|&d| d == 0.0));
        }

        #[test]
        fn target_radius_is_exact(fam in family_strategy(), n in 3usize..14, r in 0.05f64..0.95, s in any::<u64>()) {
            let mut spec = NetworkSpec::new(fam, n).with_seed(s).with_target_radius(r).with_density(0.5);
            if fam == Family::Block { spec = spec.with_blocks(1); }
            match generate(&spec) {
                Ok(a) => prop_assert!((crate::linalg::spectral_radius(&a).unwrap() - r).abs() <= 1e-10),
                Err(Error::Spec(_)) => {} // empty sparse draw
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }

        #[test]
        fn permutation_preserves_spectrum(n in 1usize..9, vals in prop::collection::vec(-1.0f64..1.0, 64), s in any::<u64>()) {
            // generic entries keep eigenvalues simple and well conditioned
            let a = DenseMatrix::from_fn(n, n, |i, j| vals[i * 8 + j]);
            let p = permute_similar(&a, s).unwrap();
            let d = matched_max_distance(&eigenvalues(&a).unwrap(), &eigenvalues(&p).unwrap());
            prop_assert!(d <= 1e-8, "distance {}", d);
        }
    }
}
