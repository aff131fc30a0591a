//! Standard errors for `β̂` and the asymptotic variances they target.
//!
//! Feasible estimators report the finite-sample `Var(β̂)`. Oracle formulas
//! report the asymptotic variance of `√n(β̂ − β)`; the two scales differ by a
//! factor `n`, applied only when simulation results are compared.
//!
//! All sandwich estimators share the per-unit score `u_i = h_i ê_i` where
//! `h = X a` and `a` is the first row of `(XᵀX)⁻¹`, so `[sandwich]₁₁` is a
//! quadratic form in `u` whose pattern depends only on the method.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::dgp::{self, blocks, AssignmentLevel, ClusterKey, ErrorProcessSpec, ScenarioSpec};
use crate::error::{Error, Result};
use crate::linmodel::{check_contiguous_labels, Dataset, OlsFit, TslsFit};

/// Which formula produced a [`VarianceEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarianceMethod {
    Classic,
    HC0,
    HC1,
    ClusterLZ,
    HacNW,
    Tsls,
}

/// Estimated `Var(β̂)` on the finite-sample scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceEstimate {
    pub method: VarianceMethod,
    pub value: f64,
    pub se: f64,
}

impl VarianceEstimate {
    fn new(method: VarianceMethod, value: f64) -> Self {
        // sums of squares can round to a hair below zero
        let se = value.max(0.0).sqrt();
        // stored as se² so that the pair is exactly consistent
        Self {
            method,
            value: se * se,
            se,
        }
    }
}

/// A configured estimator, as listed in scenarios and on the command line.
///
/// Text forms: `classic`, `hc0`, `hc1`, `tsls`, `hac` (automatic bandwidth),
/// `hac:<L>`, and `cluster:<assign|effect|error>` with an optional `+adj`
/// suffix enabling the small-sample factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Estimator {
    Classic,
    Hc0,
    Hc1,
    Cluster { key: ClusterKey, adjust: bool },
    HacNw { bandwidth: Option<usize> },
    Tsls,
}

impl Estimator {
    pub fn cluster_key(&self) -> Option<ClusterKey> {
        match self {
            Self::Cluster { key, .. } => Some(*key),
            _ => None,
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Classic => f.write_str("classic"),
            Self::Hc0 => f.write_str("hc0"),
            Self::Hc1 => f.write_str("hc1"),
            Self::Tsls => f.write_str("tsls"),
            Self::HacNw { bandwidth: None } => f.write_str("hac"),
            Self::HacNw { bandwidth: Some(l) } => write!(f, "hac:{l}"),
            Self::Cluster { key, adjust } => {
                let k = match key {
                    ClusterKey::Assignment => "assign",
                    ClusterKey::Effect => "effect",
                    ClusterKey::Error => "error",
                };
                write!(f, "cluster:{k}{}", if *adjust { "+adj" } else { "" })
            }
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || Error::Config(format!("unknown variance method `{s}`"));
        Ok(match s.as_str() {
            "classic" => Self::Classic,
            "hc0" => Self::Hc0,
            "hc1" => Self::Hc1,
            "tsls" | "2sls" => Self::Tsls,
            "hac" => Self::HacNw { bandwidth: None },
            _ if s.starts_with("hac:") => Self::HacNw {
                bandwidth: Some(s[4..].parse().map_err(|_| bad())?),
            },
            _ if s.starts_with("cluster") => {
                let (body, adjust) = match s.strip_suffix("+adj") {
                    Some(b) => (b, true),
                    None => (s.as_str(), false),
                };
                let key = match body {
                    "cluster" | "cluster:assign" => ClusterKey::Assignment,
                    "cluster:effect" => ClusterKey::Effect,
                    "cluster:error" => ClusterKey::Error,
                    _ => return Err(bad()),
                };
                Self::Cluster { key, adjust }
            }
            _ => return Err(bad()),
        })
    }
}

impl TryFrom<String> for Estimator {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Estimator> for String {
    fn from(e: Estimator) -> String {
        e.to_string()
    }
}

/// `s²(D̆ᵀD̆)⁻¹`, equal to `s²[(XᵀX)⁻¹]₁₁`.
pub fn var_classic(fit: &OlsFit) -> VarianceEstimate {
    VarianceEstimate::new(VarianceMethod::Classic, fit.s2 / fit.dbreve_ss)
}

/// Classic formula with the `n − 1 − d_w` residual divisor.
pub fn var_classic_dof(fit: &OlsFit) -> VarianceEstimate {
    VarianceEstimate::new(VarianceMethod::Classic, fit.s2_dof() / fit.dbreve_ss)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HcVariant {
    HC0,
    HC1,
}

/// `u_i = (aᵀx_i) ê_i` with `a` the first row of `(XᵀX)⁻¹`.
fn beta_scores(fit: &OlsFit, data: &Dataset) -> Result<Vec<f64>> {
    let n = data.n();
    if fit.n != n || fit.k() != 1 + data.d_w() {
        return Err(Error::DimensionMismatch("fit and dataset disagree".into()));
    }
    let a = fit.xtx_inv.row(0);
    let (d, w) = (data.d(), data.w());
    Ok((0..n)
        .map(|i| {
            let mut h = a[0] * d[i];
            for j in 0..data.d_w() {
                h += a[j + 1] * w[(i, j)];
            }
            h * fit.residuals[i]
        })
        .collect())
}

/// Eicker–White sandwich, element `[1,1]`. HC1 rescales by `n / (n − 1 − d_w)`.
pub fn var_hc(fit: &OlsFit, data: &Dataset, variant: HcVariant) -> Result<VarianceEstimate> {
    let u = beta_scores(fit, data)?;
    let hc0: f64 = u.iter().map(|x| x * x).sum();
    Ok(match variant {
        HcVariant::HC0 => VarianceEstimate::new(VarianceMethod::HC0, hc0),
        HcVariant::HC1 => {
            let n = fit.n as f64;
            VarianceEstimate::new(VarianceMethod::HC1, hc0 * n / (n - fit.k() as f64))
        }
    })
}

/// Liang–Zeger cluster sandwich, element `[1,1]`. With `adjust` the value is
/// scaled by `G/(G−1) · (n−1)/(n−1−d_w)`.
pub fn var_cluster(fit: &OlsFit, data: &Dataset, cluster_ids: &[usize], adjust: bool) -> Result<VarianceEstimate> {
    if cluster_ids.len() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "cluster_ids has {} entries, expected {}",
            cluster_ids.len(),
            data.n()
        )));
    }
    let g = check_contiguous_labels(cluster_ids)?;
    if g < 2 {
        return Err(Error::SingleCluster(g));
    }
    let u = beta_scores(fit, data)?;
    let mut sums = vec![0.0; g];
    for (&c, x) in cluster_ids.iter().zip(&u) {
        sums[c] += x;
    }
    let mut value: f64 = sums.iter().map(|s| s * s).sum();
    if adjust {
        let (gf, n, k) = (g as f64, fit.n as f64, fit.k() as f64);
        value *= gf / (gf - 1.0) * (n - 1.0) / (n - k);
    }
    Ok(VarianceEstimate::new(VarianceMethod::ClusterLZ, value))
}

/// Conventional Newey–West lag, `floor(4 (n/100)^{2/9})`.
pub fn default_bandwidth(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// Newey–West with Bartlett weights `1 − h/(L+1)`. Rows must be in temporal
/// order; `L = 0` is HC0.
pub fn var_hac_nw(fit: &OlsFit, data: &Dataset, bandwidth: usize) -> Result<VarianceEstimate> {
    let u = beta_scores(fit, data)?;
    let n = u.len();
    let mut value: f64 = u.iter().map(|x| x * x).sum();
    for h in 1..=bandwidth.min(n.saturating_sub(1)) {
        let weight = 1.0 - h as f64 / (bandwidth as f64 + 1.0);
        let cross: f64 = u.iter().zip(&u[h..]).map(|(a, b)| a * b).sum();
        value += 2.0 * weight * cross;
    }
    Ok(VarianceEstimate::new(VarianceMethod::HacNW, value))
}

/// `s² / (ρ̂² σ̂_v² n)`.
pub fn var_2sls(fit: &TslsFit) -> VarianceEstimate {
    let denom = fit.rho_hat * fit.rho_hat * fit.sigma2_v_hat * fit.n as f64;
    VarianceEstimate::new(VarianceMethod::Tsls, fit.s2 / denom)
}

/// Reference distribution for interval critical values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalDist {
    Normal,
    StudentT { df: f64 },
}

/// Two-sided critical value at `level`.
pub fn critical_value(level: f64, dist: CriticalDist) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    let p = (1.0 + level) / 2.0;
    Ok(match dist {
        CriticalDist::Normal => Normal::standard().inverse_cdf(p),
        CriticalDist::StudentT { df } => StudentsT::new(0.0, 1.0, df)
            .map_err(|e| Error::Config(format!("invalid t degrees of freedom {df}: {e}")))?
            .inverse_cdf(p),
    })
}

/// Normal-theory interval `β̂ ± z_{(1+level)/2} · se`.
pub fn ci(beta_hat: f64, est: &VarianceEstimate, level: f64) -> Result<(f64, f64)> {
    ci_with(beta_hat, est, level, CriticalDist::Normal)
}

pub fn ci_with(beta_hat: f64, est: &VarianceEstimate, level: f64, dist: CriticalDist) -> Result<(f64, f64)> {
    let z = critical_value(level, dist)?;
    Ok((beta_hat - z * est.se, beta_hat + z * est.se))
}

/// Which asymptotic result an [`OracleVariance`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Theorem {
    /// Strongly exogenous unit-level regressor: `σ_ε² / σ_d²`.
    T1StrongExog,
    /// Conditional heteroscedasticity: `(σ_{e,1}² + σ_{e,2}²) / σ_d⁴`.
    T2CondHetero,
    /// Group-level assignment, strong exogeneity: `S_ε² / σ_d²`.
    T3GroupStrongExog,
    /// Group-level assignment, conditional heteroscedasticity.
    T4GroupHetero,
    /// Potential outcomes with heterogeneous effects.
    TePotentialOutcomes,
}

/// Named pieces of an oracle computation; unused entries stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct OracleComponents {
    pub sigma2_eps: Option<f64>,
    pub sigma2_d: Option<f64>,
    pub sigma2_e1: Option<f64>,
    pub sigma2_e2: Option<f64>,
    pub s2_eps: Option<f64>,
    pub mu_a: Option<Vec<f64>>,
    /// `Var(n^{-1/2} Σ τ_i) − n⁻¹ Σ Var(τ_i)`.
    pub effect_correlation: Option<f64>,
}

/// Asymptotic variance of `√n(β̂ − β)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleVariance {
    pub theorem: Theorem,
    pub asy_var: f64,
    pub components: OracleComponents,
}

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonpositiveVariance { name, value })
    }
}

fn nonnegative(name: &'static str, value: f64) -> Result<f64> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonpositiveVariance { name, value })
    }
}

/// `σ_ε² / σ_d²`.
pub fn oracle_t1(sigma2_eps: f64, sigma2_d: f64) -> Result<OracleVariance> {
    positive("sigma2_eps", sigma2_eps)?;
    positive("sigma2_d", sigma2_d)?;
    Ok(OracleVariance {
        theorem: Theorem::T1StrongExog,
        asy_var: sigma2_eps / sigma2_d,
        components: OracleComponents {
            sigma2_eps: Some(sigma2_eps),
            sigma2_d: Some(sigma2_d),
            ..Default::default()
        },
    })
}

/// `(σ_{e,1}² + σ_{e,2}²) / σ_d⁴` with `σ_{e,1}² = var_ae_avg` and
/// `σ_{e,2}² = longrun_mu_e`.
pub fn oracle_t2(mu_a: &[f64], var_ae_avg: f64, longrun_mu_e: f64, sigma2_d: f64) -> Result<OracleVariance> {
    nonnegative("var_ae_avg", var_ae_avg)?;
    nonnegative("longrun_mu_e", longrun_mu_e)?;
    positive("sigma2_d", sigma2_d)?;
    Ok(OracleVariance {
        theorem: Theorem::T2CondHetero,
        asy_var: (var_ae_avg + longrun_mu_e) / (sigma2_d * sigma2_d),
        components: OracleComponents {
            sigma2_d: Some(sigma2_d),
            sigma2_e1: Some(var_ae_avg),
            sigma2_e2: Some(longrun_mu_e),
            mu_a: Some(mu_a.to_vec()),
            ..Default::default()
        },
    })
}

/// [`oracle_t2`] with its inputs computed in closed form from a unit-level
/// scenario (assignment groups, if any, are ignored).
pub fn oracle_t2_for(spec: &ScenarioSpec) -> Result<OracleVariance> {
    check_potential_outcomes(spec)?;
    let h = dgp::hetero_components_over(spec, &vec![1; spec.n])?;
    oracle_t2(&h.mu_a, h.sigma2_e1, h.sigma2_e2, h.sigma2_d)
}

fn check_potential_outcomes(spec: &ScenarioSpec) -> Result<()> {
    spec.validate()?;
    if !spec.treatment.dist.is_binary() {
        return Err(Error::UnsupportedSpec("potential-outcomes oracles need a binary treatment".into()));
    }
    if spec.iv.is_some() || spec.alpha_dw.is_some() {
        return Err(Error::UnsupportedSpec("potential-outcomes oracles need d to be the assignment".into()));
    }
    Ok(())
}

/// `σ_d⁻⁴ n⁻¹ Σ E[(d_i − μ_d)² ε_i²] + Var(n^{-1/2} Σ τ_i) − n⁻¹ Σ Var(τ_i)`
/// for unit-level binary assignment.
pub fn oracle_te(spec: &ScenarioSpec) -> Result<OracleVariance> {
    check_potential_outcomes(spec)?;
    if spec.treatment.level != AssignmentLevel::Unit {
        return Err(Error::UnsupportedSpec("oracle_te needs unit-level assignment".into()));
    }
    let n = spec.n;
    let m = spec.treatment.dist.moments();
    let var0 = spec.error0.average_variance(n);
    let var_tau = spec.effect.unit_variance();
    // E[d*² ε²] = σ_d² Var(ε₀) + E[d*² d²] Var(τ): baseline and effect
    // noise are independent and mean zero.
    let first = (m.var * var0 + m.e_dstar2_d2 * var_tau) / (m.var * m.var);
    let correlation = spec.effect.block_sum_variance(n, 0..n)? / n as f64 - var_tau;
    let asy_var = first + correlation;
    Ok(OracleVariance {
        theorem: Theorem::TePotentialOutcomes,
        asy_var: nonnegative("asy_var", asy_var)?,
        components: OracleComponents {
            sigma2_eps: Some(var0 + (m.var + m.mean * m.mean) * var_tau),
            sigma2_d: Some(m.var),
            mu_a: Some(vec![0.0, m.var]),
            effect_correlation: Some(correlation),
            ..Default::default()
        },
    })
}

/// Within-group error covariance for [`oracle_t3`].
#[derive(Debug, Clone, PartialEq)]
pub enum WithinGroupCov {
    /// Errors from a process over the unit index; groups are contiguous.
    Process(ErrorProcessSpec),
    /// One covariance matrix per group.
    Matrices(Vec<DMatrix<f64>>),
    /// Common variance and intraclass correlation.
    Equicorrelated { sigma2: f64, icc: f64 },
}

/// `S_ε² / σ_d²` with `S_ε² = n⁻¹ Σ_j Var(Σ_{i∈j} ε_{i,j})`.
pub fn oracle_t3(group_sizes: &[usize], cov: &WithinGroupCov, sigma2_d: f64) -> Result<OracleVariance> {
    positive("sigma2_d", sigma2_d)?;
    if group_sizes.is_empty() || group_sizes.contains(&0) {
        return Err(Error::InvalidSpec("group sizes must be positive".into()));
    }
    let n: usize = group_sizes.iter().sum();
    let total: f64 = match cov {
        WithinGroupCov::Process(p) => {
            p.validate_for(n)?;
            blocks(group_sizes)
                .into_iter()
                .map(|b| p.block_sum_variance(n, b))
                .sum()
        }
        WithinGroupCov::Equicorrelated { sigma2, icc } => {
            nonnegative("sigma2", *sigma2)?;
            if !(-1.0..=1.0).contains(icc) {
                return Err(Error::InvalidSpec(format!("icc must lie in [-1, 1], got {icc}")));
            }
            group_sizes
                .iter()
                .map(|&m| {
                    let m = m as f64;
                    sigma2 * m * (1.0 + (m - 1.0) * icc)
                })
                .sum()
        }
        WithinGroupCov::Matrices(mats) => {
            if mats.len() != group_sizes.len() {
                return Err(Error::DimensionMismatch("one covariance matrix per group".into()));
            }
            let mut total = 0.0;
            for (mat, &m) in mats.iter().zip(group_sizes) {
                if mat.nrows() != m || mat.ncols() != m {
                    return Err(Error::DimensionMismatch(format!("group of size {m} needs an {m}x{m} matrix")));
                }
                let scale = mat.diagonal().abs().max().max(f64::MIN_POSITIVE);
                let asym = (mat - mat.transpose()).amax();
                let min_eig = mat.clone().symmetric_eigen().eigenvalues.min();
                if asym > 1e-12 * scale || min_eig < -1e-10 * scale {
                    return Err(Error::InvalidSpec("group covariance is not symmetric positive semidefinite".into()));
                }
                total += mat.sum();
            }
            total
        }
    };
    let s2 = total / n as f64;
    if !(s2 > 0.0) {
        return Err(Error::DegenerateSpec("S_eps^2 = 0: within-group error sums have no variance".into()));
    }
    Ok(OracleVariance {
        theorem: Theorem::T3GroupStrongExog,
        asy_var: s2 / sigma2_d,
        components: OracleComponents {
            s2_eps: Some(s2),
            sigma2_d: Some(sigma2_d),
            ..Default::default()
        },
    })
}

/// `(S_{e,1}² + S_{e,2}²) / σ_d⁴` for group-level assignment, `e` summed
/// within assignment groups.
pub fn oracle_t4(spec: &ScenarioSpec) -> Result<OracleVariance> {
    check_potential_outcomes(spec)?;
    let sizes = spec
        .group_sizes()?
        .filter(|_| spec.treatment.level == AssignmentLevel::Group)
        .ok_or_else(|| Error::UnsupportedSpec("oracle_t4 needs group-level assignment".into()))?;
    let h = dgp::hetero_components_over(spec, &sizes)?;
    let s4 = h.sigma2_d * h.sigma2_d;
    Ok(OracleVariance {
        theorem: Theorem::T4GroupHetero,
        asy_var: (h.sigma2_e1 + h.sigma2_e2) / s4,
        components: OracleComponents {
            sigma2_d: Some(h.sigma2_d),
            sigma2_e1: Some(h.sigma2_e1),
            sigma2_e2: Some(h.sigma2_e2),
            mu_a: Some(h.mu_a.to_vec()),
            ..Default::default()
        },
    })
}

/// The oracle matching a scenario's design.
pub fn oracle_for(spec: &ScenarioSpec) -> Result<OracleVariance> {
    let n = spec.n;
    let m = spec.treatment.dist.moments();
    if let Some(iv) = &spec.iv {
        let c = iv.endogeneity;
        let sigma2_eps = spec.error0.average_variance(n) + c * c * iv.eta.average_variance(n);
        return oracle_t1(sigma2_eps, iv.rho * iv.rho * m.var);
    }
    match (spec.treatment.level, spec.effect.is_constant()) {
        (AssignmentLevel::Unit, true) => oracle_t1(spec.error0.average_variance(n), m.var),
        (AssignmentLevel::Unit, false) => oracle_te(spec),
        (AssignmentLevel::Group, true) => oracle_t3(
            &spec.group_sizes()?.expect("validated"),
            &WithinGroupCov::Process(spec.error0.clone()),
            m.var,
        ),
        (AssignmentLevel::Group, false) => oracle_t4(spec),
    }
}

/// Dense `(XᵀX)⁻¹ XᵀΩX (XᵀX)⁻¹` element `[1,1]` for a given `Ω`; a reference
/// for tests and small problems.
pub fn sandwich_dense(x: &DMatrix<f64>, omega: &DMatrix<f64>) -> Option<f64> {
    let bread = (x.transpose() * x).try_inverse()?;
    let v = &bread * x.transpose() * omega * x * &bread;
    Some(v[(0, 0)])
}
