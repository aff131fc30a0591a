//! Data-generating processes: error dependence, unit- and group-level random
//! assignment, potential outcomes with constant or heterogeneous effects,
//! controls, and an instrumented first stage.
//!
//! Every draw is a deterministic function of `(spec, seed)`. Each generator
//! reads its own stream (see [`crate::rng`]), so changing one component of a
//! scenario never perturbs the draws of another.

mod presets;
mod process;

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linmodel::Dataset;
use crate::rng::{self, component};
use crate::variance::{self, Estimator, OracleVariance};

pub use presets::{preset, preset_info, preset_names, CoverageBand, PresetInfo, DEFAULT_N, PRESETS};
pub use process::{gen_errors, ErrorProcessSpec};

/// Block sizes over the unit index: an explicit list, or one size repeated
/// (the last block takes the remainder).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sizes {
    Uniform(usize),
    List(Vec<usize>),
}

impl Sizes {
    pub fn resolve(&self, n: usize) -> Result<Vec<usize>> {
        let sizes = match self {
            Sizes::Uniform(0) => return Err(Error::InvalidSpec("block size must be positive".into())),
            Sizes::Uniform(m) => {
                let mut v = vec![*m; n / m];
                if !n.is_multiple_of(*m) {
                    v.push(n % m);
                }
                v
            }
            Sizes::List(v) => v.clone(),
        };
        if sizes.contains(&0) {
            return Err(Error::InvalidSpec("block sizes must be positive".into()));
        }
        let total: usize = sizes.iter().sum();
        if total != n {
            return Err(Error::InvalidSpec(format!("block sizes sum to {total}, expected n = {n}")));
        }
        Ok(sizes)
    }
}

/// Contiguous index ranges for a list of block sizes.
pub fn blocks(sizes: &[usize]) -> Vec<Range<usize>> {
    let mut start = 0;
    sizes
        .iter()
        .map(|&s| {
            let r = start..start + s;
            start += s;
            r
        })
        .collect()
}

/// Per-unit block labels `0..G` for a list of block sizes.
pub fn block_ids(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &s)| std::iter::repeat_n(g, s))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignmentLevel {
    Unit,
    Group,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TreatmentDist {
    Bernoulli { p: f64 },
    Normal { mu: f64, sigma: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreatmentSpec {
    pub level: AssignmentLevel,
    pub dist: TreatmentDist,
}

/// Moments of the assignment distribution used by the oracle formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreatmentMoments {
    pub mean: f64,
    pub var: f64,
    /// `E[(d − μ)² d]`.
    pub e_dstar2_d: f64,
    /// `E[(d − μ)² d²]`.
    pub e_dstar2_d2: f64,
    /// `E[(d − μ)⁴]`.
    pub central4: f64,
}

impl TreatmentDist {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Bernoulli { p } => {
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(Error::InvalidSpec(format!("Bernoulli p must lie in (0, 1), got {p}")));
                }
            }
            Self::Normal { mu, sigma } => {
                if !mu.is_finite() || !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidSpec(format!("Normal needs finite mu and sigma > 0, got ({mu}, {sigma})")));
                }
            }
            Self::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return Err(Error::InvalidSpec("discrete values and probs must be nonempty and equal length".into()));
                }
                if probs.iter().any(|&p| !(p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidSpec("discrete probs must be nonnegative and sum to 1".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidSpec("discrete values must be finite".into()));
                }
            }
        }
        if self.moments().var <= 1e-12 {
            return Err(Error::InvalidSpec("treatment distribution has zero variance".into()));
        }
        Ok(())
    }

    pub fn moments(&self) -> TreatmentMoments {
        match self {
            Self::Bernoulli { p } => {
                let q = 1.0 - p;
                TreatmentMoments {
                    mean: *p,
                    var: p * q,
                    e_dstar2_d: p * q * q,
                    e_dstar2_d2: p * q * q,
                    central4: p * q * (q * q * q + p * p * p),
                }
            }
            Self::Normal { mu, sigma } => {
                let s2 = sigma * sigma;
                TreatmentMoments {
                    mean: *mu,
                    var: s2,
                    e_dstar2_d: mu * s2,
                    e_dstar2_d2: 3.0 * s2 * s2 + mu * mu * s2,
                    central4: 3.0 * s2 * s2,
                }
            }
            Self::Discrete { values, probs } => {
                let mean: f64 = values.iter().zip(probs).map(|(v, p)| v * p).sum();
                let e = |f: &dyn Fn(f64) -> f64| values.iter().zip(probs).map(|(&v, p)| p * f(v)).sum::<f64>();
                TreatmentMoments {
                    mean,
                    var: e(&|v| (v - mean).powi(2)),
                    e_dstar2_d: e(&|v| (v - mean).powi(2) * v),
                    e_dstar2_d2: e(&|v| (v - mean).powi(2) * v * v),
                    central4: e(&|v| (v - mean).powi(4)),
                }
            }
        }
    }

    /// True when the support is contained in `{0, 1}`.
    pub fn is_binary(&self) -> bool {
        match self {
            Self::Bernoulli { .. } => true,
            Self::Normal { .. } => false,
            Self::Discrete { values, probs } => values
                .iter()
                .zip(probs)
                .all(|(&v, &p)| p == 0.0 || v == 0.0 || v == 1.0),
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Bernoulli { p } => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Normal { mu, sigma } => mu + sigma * rng.sample::<f64, _>(StandardNormal),
            Self::Discrete { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().unwrap()
            }
        }
    }
}

/// Treatment-effect structure of the potential outcomes, `τ_i = y_i(1) − y_i(0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EffectSpec {
    Constant {
        tau: f64,
    },
    HeterogeneousIid {
        mean_tau: f64,
        var_tau: f64,
    },
    /// `τ_i = mean + b_c + u_i` with a shared `b_c ~ N(0, var_between)` per
    /// contiguous effect cluster and `u_i ~ N(0, var_within)`.
    HeterogeneousClustered {
        mean_tau: f64,
        var_between: f64,
        var_within: f64,
        cluster_sizes: Sizes,
    },
}

impl EffectSpec {
    pub fn mean(&self) -> f64 {
        match self {
            Self::Constant { tau } => *tau,
            Self::HeterogeneousIid { mean_tau, .. } | Self::HeterogeneousClustered { mean_tau, .. } => *mean_tau,
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::HeterogeneousIid { var_tau, .. } => *var_tau == 0.0,
            Self::HeterogeneousClustered {
                var_between, var_within, ..
            } => *var_between == 0.0 && *var_within == 0.0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidSpec(format!("{what} must be finite and nonnegative")));
        match self {
            Self::Constant { tau } if !tau.is_finite() => bad("tau"),
            Self::HeterogeneousIid { mean_tau, var_tau } if !mean_tau.is_finite() || !(*var_tau >= 0.0) => {
                bad("var_tau")
            }
            Self::HeterogeneousClustered {
                mean_tau,
                var_between,
                var_within,
                cluster_sizes,
            } => {
                if !mean_tau.is_finite() || !(*var_between >= 0.0) || !(*var_within >= 0.0) {
                    return bad("effect variances");
                }
                cluster_sizes.resolve(n).map(|_| ())
            }
            _ => Ok(()),
        }
    }

    /// Effect cluster sizes, if clustered.
    pub fn cluster_sizes(&self, n: usize) -> Result<Option<Vec<usize>>> {
        match self {
            Self::HeterogeneousClustered { cluster_sizes, .. } => cluster_sizes.resolve(n).map(Some),
            _ => Ok(None),
        }
    }

    /// `Var(τ_i)`, the same for every unit.
    pub fn unit_variance(&self) -> f64 {
        match self {
            Self::Constant { .. } => 0.0,
            Self::HeterogeneousIid { var_tau, .. } => *var_tau,
            Self::HeterogeneousClustered {
                var_between, var_within, ..
            } => var_between + var_within,
        }
    }

    /// `Var(Σ_{i ∈ block} τ_i)` for a contiguous block.
    pub fn block_sum_variance(&self, n: usize, block: Range<usize>) -> Result<f64> {
        let m = block.len() as f64;
        Ok(match self {
            Self::Constant { .. } => 0.0,
            Self::HeterogeneousIid { var_tau, .. } => m * var_tau,
            Self::HeterogeneousClustered {
                var_between, var_within, ..
            } => {
                let sizes = self.cluster_sizes(n)?.unwrap();
                let between: f64 = blocks(&sizes)
                    .into_iter()
                    .map(|c| {
                        let lo = c.start.max(block.start);
                        let hi = c.end.min(block.end);
                        let o = hi.saturating_sub(lo) as f64;
                        o * o
                    })
                    .sum();
                var_between * between + var_within * m
            }
        })
    }

    fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let z = |rng: &mut R| rng.sample::<f64, _>(StandardNormal);
        Ok(match self {
            Self::Constant { tau } => vec![*tau; n],
            Self::HeterogeneousIid { mean_tau, var_tau } => {
                let s = var_tau.sqrt();
                (0..n).map(|_| mean_tau + s * z(rng)).collect()
            }
            Self::HeterogeneousClustered {
                mean_tau,
                var_between,
                var_within,
                ..
            } => {
                let (sb, sw) = (var_between.sqrt(), var_within.sqrt());
                let sizes = self.cluster_sizes(n)?.unwrap();
                let mut out = Vec::with_capacity(n);
                for s in sizes {
                    let b = sb * z(rng);
                    for _ in 0..s {
                        out.push(mean_tau + b + sw * z(rng));
                    }
                }
                out
            }
        })
    }
}

/// Instrumented first stage `d = ρ v + wᵀα + η`. The instrument `v` is drawn
/// from the scenario's treatment distribution; the structural error is
/// `ε = ε₀ + endogeneity · η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IvSpec {
    pub rho: f64,
    pub eta: ErrorProcessSpec,
    #[serde(default)]
    pub endogeneity: f64,
}

/// A complete data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub n: usize,
    /// Assignment groups; present exactly when `treatment.level = group`.
    #[serde(default)]
    pub group_sizes: Option<Sizes>,
    /// Baseline noise of `y(0)`.
    pub error0: ErrorProcessSpec,
    pub treatment: TreatmentSpec,
    pub effect: EffectSpec,
    /// Non-constant controls; the intercept is always added in front.
    #[serde(default)]
    pub controls: Vec<ErrorProcessSpec>,
    /// `(intercept, control coefficients…)`.
    pub gamma_true: Vec<f64>,
    /// Linear dependence `d = Wα + η` of the regressor on the controls.
    #[serde(default)]
    pub alpha_dw: Option<Vec<f64>>,
    #[serde(default)]
    pub iv: Option<IvSpec>,
    /// Variance estimators applied in simulation.
    #[serde(default = "default_methods")]
    pub methods: Vec<Estimator>,
}

fn default_methods() -> Vec<Estimator> {
    vec![Estimator::Classic, Estimator::Hc0]
}

impl ScenarioSpec {
    /// Number of control columns, intercept included.
    pub fn d_w(&self) -> usize {
        1 + self.controls.len()
    }

    /// `β ≡ E[τ_i]`.
    pub fn beta_true(&self) -> f64 {
        self.effect.mean()
    }

    pub fn group_sizes(&self) -> Result<Option<Vec<usize>>> {
        self.group_sizes.as_ref().map(|s| s.resolve(self.n)).transpose()
    }

    /// `κ_n / n = sqrt(Σ n_j²) / n`, for group-level designs.
    pub fn kappa_ratio(&self) -> Result<Option<f64>> {
        Ok(self.group_sizes()?.map(|sizes| {
            let ss: f64 = sizes.iter().map(|&s| (s * s) as f64).sum();
            ss.sqrt() / self.n as f64
        }))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n < self.d_w() + 2 {
            return Err(Error::InvalidSpec(format!("n = {n} is too small for {} controls", self.d_w())));
        }
        self.error0.validate_for(n)?;
        for c in &self.controls {
            c.validate_for(n)?;
        }
        self.treatment.dist.validate()?;
        self.effect.validate(n)?;
        if self.gamma_true.len() != self.d_w() {
            return Err(Error::InvalidSpec(format!(
                "gamma_true has {} entries, expected {} (intercept + controls)",
                self.gamma_true.len(),
                self.d_w()
            )));
        }
        match (self.treatment.level, &self.group_sizes) {
            (AssignmentLevel::Group, None) => {
                return Err(Error::InvalidSpec("group-level assignment needs group_sizes".into()))
            }
            (AssignmentLevel::Unit, Some(_)) => {
                return Err(Error::InvalidSpec("group_sizes given for unit-level assignment".into()))
            }
            _ => {}
        }
        if let Some(ratio) = self.kappa_ratio()? {
            if ratio >= 0.5 {
                return Err(Error::InvalidSpec(format!("kappa_n / n = {ratio:.3} must be below 0.5")));
            }
        }
        if let Some(alpha) = &self.alpha_dw {
            if alpha.len() != self.d_w() {
                return Err(Error::InvalidSpec(format!(
                    "alpha_dw has {} entries, expected {}",
                    alpha.len(),
                    self.d_w()
                )));
            }
        }
        if let Some(iv) = &self.iv {
            iv.eta.validate_for(n)?;
            if !iv.rho.is_finite() || iv.rho == 0.0 || !iv.endogeneity.is_finite() {
                return Err(Error::InvalidSpec("iv.rho must be finite and nonzero".into()));
            }
            if self.treatment.level == AssignmentLevel::Group {
                return Err(Error::UnsupportedSpec("instruments with group-level assignment".into()));
            }
        }
        if !self.effect.is_constant() {
            if self.iv.is_some() || self.alpha_dw.is_some() {
                return Err(Error::UnsupportedSpec(
                    "heterogeneous effects need a binary regressor; drop iv / alpha_dw".into(),
                ));
            }
            if !self.treatment.dist.is_binary() {
                return Err(Error::UnsupportedSpec("heterogeneous effects need a binary treatment".into()));
            }
        }
        for m in &self.methods {
            self.cluster_ids(m.cluster_key().unwrap_or(ClusterKey::Assignment))
                .map_err(|e| Error::InvalidSpec(format!("method `{m}`: {e}")))?;
            if *m == Estimator::Tsls && self.iv.is_none() {
                return Err(Error::InvalidSpec("method `tsls` needs an iv block".into()));
            }
        }
        Ok(())
    }

    /// Cluster labels used by cluster-robust estimators.
    pub fn cluster_ids(&self, key: ClusterKey) -> Result<Vec<usize>> {
        let sizes = match key {
            ClusterKey::Assignment => self.group_sizes()?.unwrap_or_else(|| vec![1; self.n]),
            ClusterKey::Effect => self
                .effect
                .cluster_sizes(self.n)?
                .ok_or_else(|| Error::InvalidSpec("effect-level clustering needs clustered effects".into()))?,
            ClusterKey::Error => match &self.error0 {
                ErrorProcessSpec::ClusterRe { cluster_size, .. } => Sizes::Uniform(*cluster_size).resolve(self.n)?,
                _ => return Err(Error::InvalidSpec("error-level clustering needs cluster-re baseline errors".into())),
            },
        };
        Ok(block_ids(&sizes))
    }

    /// Closed-form population quantities and the matching oracle variance.
    pub fn truth(&self) -> Result<TruthRecord> {
        self.validate()?;
        let n = self.n;
        let mom = self.treatment.dist.moments();
        let avg0 = self.error0.average_variance(n);
        let (sigma2_eps, sigma2_d) = match &self.iv {
            Some(iv) => {
                let c = iv.endogeneity;
                (avg0 + c * c * iv.eta.average_variance(n), mom.var)
            }
            None => {
                let e_d2 = mom.var + mom.mean * mom.mean;
                (avg0 + e_d2 * self.effect.unit_variance(), mom.var)
            }
        };
        let hetero = (!self.effect.is_constant()).then(|| hetero_components(self)).transpose()?;
        let s2_eps = match self.group_sizes()? {
            Some(sizes) if self.effect.is_constant() => Some(
                blocks(&sizes)
                    .into_iter()
                    .map(|b| self.error0.block_sum_variance(n, b))
                    .sum::<f64>()
                    / n as f64,
            ),
            _ => None,
        };
        Ok(TruthRecord {
            beta_true: self.beta_true(),
            gamma_true: self.gamma_true.clone(),
            sigma2_eps,
            sigma2_d,
            mu_a: hetero.map(|h| h.mu_a),
            sigma2_e1: hetero.map(|h| h.sigma2_e1),
            sigma2_e2: hetero.map(|h| h.sigma2_e2),
            s2_eps,
            kappa_ratio: self.kappa_ratio()?,
            oracle: match variance::oracle_for(self) {
                Ok(o) => Some(o),
                Err(Error::NonpositiveVariance { .. } | Error::DegenerateSpec(_)) => None,
                Err(e) => return Err(e),
            },
        })
    }
}

/// Which partition a cluster-robust estimator sums scores over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterKey {
    /// Assignment groups (singletons under unit-level assignment).
    Assignment,
    /// Treatment-effect clusters.
    Effect,
    /// Baseline error clusters.
    Error,
}

/// Inputs of the conditional-heteroscedasticity oracles for the potential
/// outcomes mapping `e_i = (y_i(0) − E y_i(0), τ_i − E τ)`, `σ(d) = (1, d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeteroComponents {
    /// `μ_A = E[(d − μ_d)(1, d)] = (0, σ_d²)`.
    pub mu_a: [f64; 2],
    /// Unit level: `n⁻¹ Σ_i E[((A_i − μ_A)ᵀe_i)²]`; group level: the same
    /// with `e` summed within assignment groups.
    pub sigma2_e1: f64,
    /// `E[(n^{-1/2} Σ_i μ_Aᵀe_i)²]`.
    pub sigma2_e2: f64,
    pub sigma2_d: f64,
}

/// Closed-form heteroscedasticity components. Group-level designs sum `e`
/// within assignment groups; unit-level designs use singleton blocks.
pub fn hetero_components(spec: &ScenarioSpec) -> Result<HeteroComponents> {
    let sizes = spec.group_sizes()?.unwrap_or_else(|| vec![1; spec.n]);
    hetero_components_over(spec, &sizes)
}

pub(crate) fn hetero_components_over(spec: &ScenarioSpec, sizes: &[usize]) -> Result<HeteroComponents> {
    let n = spec.n;
    let m = spec.treatment.dist.moments();
    // Cov(A) for A = d*(1, d); baseline and effect noise are independent so
    // the off-diagonal term drops out of E[((A − μ)ᵀ s)²].
    let cov_a11 = m.var;
    let cov_a22 = m.e_dstar2_d2 - m.var * m.var;
    let (sum0, sum_tau) = if sizes.iter().all(|&s| s == 1) {
        (n as f64 * spec.error0.average_variance(n), n as f64 * spec.effect.unit_variance())
    } else {
        let mut acc = (0.0, 0.0);
        for b in blocks(sizes) {
            acc.0 += spec.error0.block_sum_variance(n, b.clone());
            acc.1 += spec.effect.block_sum_variance(n, b)?;
        }
        acc
    };
    let e1 = cov_a11 * sum0 + cov_a22 * sum_tau;
    let total_tau = spec.effect.block_sum_variance(n, 0..n)?;
    Ok(HeteroComponents {
        mu_a: [0.0, m.var],
        sigma2_e1: e1 / n as f64,
        sigma2_e2: m.var * m.var * total_tau / n as f64,
        sigma2_d: m.var,
    })
}

/// Population quantities attached to a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthRecord {
    pub beta_true: f64,
    pub gamma_true: Vec<f64>,
    /// `n⁻¹ Σ Var(ε_i)`.
    pub sigma2_eps: f64,
    /// Variance of the randomized regressor (of the instrument under IV, of
    /// `η` when `d = Wα + η`).
    pub sigma2_d: f64,
    pub mu_a: Option<[f64; 2]>,
    pub sigma2_e1: Option<f64>,
    pub sigma2_e2: Option<f64>,
    /// `n⁻¹ Σ_j Var(Σ_{i∈j} ε_{i,j})` for group-level designs.
    pub s2_eps: Option<f64>,
    pub kappa_ratio: Option<f64>,
    /// `None` when the asymptotic variance is zero (noiseless designs).
    pub oracle: Option<OracleVariance>,
}

/// `n` draws (unit level) or one draw per group replicated over its units.
pub fn gen_treatment<R: Rng + ?Sized>(
    spec: &TreatmentSpec,
    n: usize,
    group_sizes: Option<&[usize]>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    spec.dist.validate()?;
    match spec.level {
        AssignmentLevel::Unit => Ok((0..n).map(|_| spec.dist.draw(rng)).collect()),
        AssignmentLevel::Group => {
            let sizes = group_sizes
                .ok_or_else(|| Error::InvalidSpec("group-level assignment needs group sizes".into()))?;
            if sizes.iter().sum::<usize>() != n || sizes.contains(&0) {
                return Err(Error::InvalidSpec("group sizes must be positive and sum to n".into()));
            }
            let mut out = Vec::with_capacity(n);
            for &s in sizes {
                let dj = spec.dist.draw(rng);
                out.extend(std::iter::repeat_n(dj, s));
            }
            Ok(out)
        }
    }
}

/// Realized potential outcomes and the regression error they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOutcomes {
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub y: Vec<f64>,
    pub tau: Vec<f64>,
    /// `ε_i = (y_i(0) − E y_i(0)) + d_i (τ_i − E τ)`.
    pub epsilon: Vec<f64>,
}

/// `y(0) = Wγ + baseline`, `y(1) = y(0) + τ`, `y = y(0) + d τ`.
pub fn gen_potential_outcomes<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    w: &DMatrix<f64>,
    d: &[f64],
    baseline: &[f64],
    rng: &mut R,
) -> Result<PotentialOutcomes> {
    let n = d.len();
    if baseline.len() != n || w.nrows() != n || w.ncols() != spec.gamma_true.len() {
        return Err(Error::DimensionMismatch("d, baseline, W and gamma_true disagree".into()));
    }
    if !spec.effect.is_constant() && d.iter().any(|&x| x != 0.0 && x != 1.0) {
        return Err(Error::UnsupportedSpec("heterogeneous effects need a binary treatment".into()));
    }
    let beta = spec.beta_true();
    let tau = spec.effect.draw(n, rng)?;
    let gamma = DVector::from_column_slice(&spec.gamma_true);
    let wg = w * gamma;
    let mut out = PotentialOutcomes {
        y0: Vec::with_capacity(n),
        y1: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        tau,
        epsilon: Vec::with_capacity(n),
    };
    for i in 0..n {
        let y0 = wg[i] + baseline[i];
        let t = out.tau[i];
        out.y0.push(y0);
        out.y1.push(y0 + t);
        out.y.push(y0 + d[i] * t);
        out.epsilon.push(baseline[i] + d[i] * (t - beta));
    }
    Ok(out)
}

/// One simulated sample with its latent pieces.
#[derive(Debug, Clone)]
pub struct Draw {
    pub dataset: Dataset,
    pub outcomes: PotentialOutcomes,
    pub baseline: Vec<f64>,
    /// The randomized draw: `d` itself, `η` when `d = Wα + η`, or the
    /// instrument under IV.
    pub assigned: Vec<f64>,
}

/// Simulates one sample keyed by `seed`.
pub fn simulate(spec: &ScenarioSpec, seed: u64) -> Result<Draw> {
    spec.validate()?;
    let n = spec.n;
    let group_sizes = spec.group_sizes()?;

    let mut w = DMatrix::from_element(n, spec.d_w(), 1.0);
    for (k, c) in spec.controls.iter().enumerate() {
        let col = gen_errors(c, n, &mut rng::stream(seed, component::CONTROLS + k as u64))?;
        w.set_column(k + 1, &DVector::from_vec(col));
    }
    let assigned = gen_treatment(
        &spec.treatment,
        n,
        group_sizes.as_deref(),
        &mut rng::stream(seed, component::TREATMENT),
    )?;
    let mut baseline = gen_errors(&spec.error0, n, &mut rng::stream(seed, component::ERROR0))?;
    let alpha = spec
        .alpha_dw
        .as_ref()
        .map(|a| &w * DVector::from_column_slice(a))
        .unwrap_or_else(|| DVector::zeros(n));

    let d: Vec<f64> = match &spec.iv {
        Some(iv) => {
            let eta = gen_errors(&iv.eta, n, &mut rng::stream(seed, component::IV_ETA))?;
            for (b, e) in baseline.iter_mut().zip(&eta) {
                *b += iv.endogeneity * e;
            }
            (0..n).map(|i| iv.rho * assigned[i] + alpha[i] + eta[i]).collect()
        }
        None => (0..n).map(|i| alpha[i] + assigned[i]).collect(),
    };
    let outcomes = gen_potential_outcomes(spec, &w, &d, &baseline, &mut rng::stream(seed, component::EFFECT))?;

    let mut dataset = Dataset::new(DVector::from_column_slice(&outcomes.y), DVector::from_vec(d), w)?;
    if let Some(sizes) = &group_sizes {
        dataset = dataset.with_groups(block_ids(sizes))?;
    }
    if spec.iv.is_some() {
        dataset = dataset.with_instrument(DVector::from_column_slice(&assigned))?;
    }
    Ok(Draw {
        dataset,
        outcomes,
        baseline,
        assigned,
    })
}

/// Simulated dataset plus the closed-form truth for the scenario.
pub fn assemble(spec: &ScenarioSpec, seed: u64) -> Result<(Dataset, TruthRecord)> {
    let truth = spec.truth()?;
    let draw = simulate(spec, seed)?;
    Ok((draw.dataset, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_spec() -> ScenarioSpec {
        ScenarioSpec {
            name: None,
            n: 40,
            group_sizes: None,
            error0: ErrorProcessSpec::Ar1 { rho: 0.5, sigma: 1.0 },
            treatment: TreatmentSpec {
                level: AssignmentLevel::Unit,
                dist: TreatmentDist::Bernoulli { p: 0.5 },
            },
            effect: EffectSpec::Constant { tau: 2.0 },
            controls: vec![ErrorProcessSpec::Iid { sigma: 1.0 }],
            gamma_true: vec![1.0, -0.5],
            alpha_dw: None,
            iv: None,
            methods: default_methods(),
        }
    }

    #[test]
    fn bernoulli_boundaries_rejected() {
        for p in [0.0, 1.0, -0.1, 1.5] {
            let spec = TreatmentSpec {
                level: AssignmentLevel::Unit,
                dist: TreatmentDist::Bernoulli { p },
            };
            assert!(matches!(
                gen_treatment(&spec, 10, None, &mut rng::stream(1, 2)),
                Err(Error::InvalidSpec(_))
            ));
        }
    }

    #[test]
    fn degenerate_discrete_rejected() {
        let spec = TreatmentSpec {
            level: AssignmentLevel::Unit,
            dist: TreatmentDist::Discrete {
                values: vec![1.0],
                probs: vec![1.0],
            },
        };
        assert!(matches!(
            gen_treatment(&spec, 10, None, &mut rng::stream(1, 2)),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn bernoulli_mean() {
        let spec = TreatmentSpec {
            level: AssignmentLevel::Unit,
            dist: TreatmentDist::Bernoulli { p: 0.5 },
        };
        let n = 100_000;
        let d = gen_treatment(&spec, n, None, &mut rng::stream(4, 2)).unwrap();
        let mean = d.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn group_assignment_replicates() {
        let spec = TreatmentSpec {
            level: AssignmentLevel::Group,
            dist: TreatmentDist::Normal { mu: 0.0, sigma: 1.0 },
        };
        let d = gen_treatment(&spec, 5, Some(&[3, 2]), &mut rng::stream(2, 2)).unwrap();
        assert_eq!(d[0], d[1]);
        assert_eq!(d[1], d[2]);
        assert_eq!(d[3], d[4]);
        assert_ne!(d[2], d[3]);
        assert!(gen_treatment(&spec, 5, None, &mut rng::stream(2, 2)).is_err());
        assert!(gen_treatment(&spec, 5, Some(&[3, 3]), &mut rng::stream(2, 2)).is_err());
    }

    #[test]
    fn discrete_moments_match_bernoulli() {
        let b = TreatmentDist::Bernoulli { p: 0.3 }.moments();
        let d = TreatmentDist::Discrete {
            values: vec![0.0, 1.0],
            probs: vec![0.7, 0.3],
        }
        .moments();
        for (x, y) in [
            (b.mean, d.mean),
            (b.var, d.var),
            (b.e_dstar2_d, d.e_dstar2_d),
            (b.e_dstar2_d2, d.e_dstar2_d2),
            (b.central4, d.central4),
        ] {
            assert!((x - y).abs() < 1e-14, "{x} vs {y}");
        }
    }

    #[test]
    fn constant_effect_outcomes() {
        let spec = base_spec();
        let w = DMatrix::from_element(4, 2, 1.0);
        let po = gen_potential_outcomes(&spec, &w, &[1.0, 0.0, 1.0, 1.0], &[0.1, 0.2, 0.3, 0.4], &mut rng::stream(1, 3))
            .unwrap();
        for i in 0..4 {
            assert!((po.y1[i] - po.y0[i] - 2.0).abs() < 1e-15);
        }
        let ones = [1.0; 4];
        let po = gen_potential_outcomes(&spec, &w, &ones, &[0.1, 0.2, 0.3, 0.4], &mut rng::stream(1, 3)).unwrap();
        assert_eq!(po.y, po.y1);
    }

    #[test]
    fn epsilon_identity_holds_exactly() {
        let mut spec = base_spec();
        spec.effect = EffectSpec::HeterogeneousClustered {
            mean_tau: 1.0,
            var_between: 1.0,
            var_within: 0.5,
            cluster_sizes: Sizes::Uniform(4),
        };
        for seed in 0..20 {
            let draw = simulate(&spec, seed).unwrap();
            let data = &draw.dataset;
            let g = DVector::from_column_slice(&spec.gamma_true);
            let wg = data.w() * g;
            for i in 0..spec.n {
                let direct = data.y()[i] - data.d()[i] * spec.beta_true() - wg[i];
                assert!((draw.outcomes.epsilon[i] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn heterogeneous_effects_need_binary_d() {
        let mut spec = base_spec();
        spec.effect = EffectSpec::HeterogeneousIid {
            mean_tau: 1.0,
            var_tau: 1.0,
        };
        let w = DMatrix::from_element(3, 2, 1.0);
        let res = gen_potential_outcomes(&spec, &w, &[0.5, 1.0, 0.0], &[0.0; 3], &mut rng::stream(1, 3));
        assert!(matches!(res, Err(Error::UnsupportedSpec(_))));
        spec.treatment.dist = TreatmentDist::Normal { mu: 0.0, sigma: 1.0 };
        assert!(matches!(spec.validate(), Err(Error::UnsupportedSpec(_))));
    }

    #[test]
    fn noiseless_assembly_is_exact() {
        let mut spec = base_spec();
        spec.error0 = ErrorProcessSpec::Iid { sigma: 0.0 };
        let (data, truth) = assemble(&spec, 3).unwrap();
        let g = DVector::from_column_slice(&spec.gamma_true);
        let fitted = data.d() * truth.beta_true + data.w() * g;
        assert_eq!(data.y(), &fitted);
    }

    #[test]
    fn same_seed_same_dataset() {
        let spec = base_spec();
        let a = assemble(&spec, 99).unwrap().0;
        let b = assemble(&spec, 99).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, assemble(&spec, 100).unwrap().0);
    }

    #[test]
    fn group_d_constant_within_groups() {
        let mut spec = base_spec();
        spec.treatment.level = AssignmentLevel::Group;
        spec.group_sizes = Some(Sizes::List(vec![5, 3, 7, 5, 10, 10]));
        let draw = simulate(&spec, 5).unwrap();
        let ids = draw.dataset.group_ids().unwrap();
        for i in 1..spec.n {
            if ids[i] == ids[i - 1] {
                assert_eq!(draw.dataset.d()[i], draw.dataset.d()[i - 1]);
            }
        }
    }

    #[test]
    fn spec_validation() {
        let mut spec = base_spec();
        spec.group_sizes = Some(Sizes::Uniform(5));
        assert!(spec.validate().is_err());
        spec.treatment.level = AssignmentLevel::Group;
        assert!(spec.validate().is_ok());
        spec.group_sizes = Some(Sizes::Uniform(30));
        // kappa_n / n = sqrt(900 + 100)/40 > 0.5
        assert!(spec.validate().is_err());
        let mut spec = base_spec();
        spec.gamma_true = vec![1.0];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn sizes_resolve() {
        assert_eq!(Sizes::Uniform(3).resolve(7).unwrap(), vec![3, 3, 1]);
        assert!(Sizes::List(vec![2, 2]).resolve(5).is_err());
        assert!(Sizes::Uniform(0).resolve(5).is_err());
        assert_eq!(block_ids(&[2, 1, 3]), vec![0, 0, 1, 2, 2, 2]);
    }
}
