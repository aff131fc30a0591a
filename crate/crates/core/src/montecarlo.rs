//! Replication engine. Each replication draws from its own stream keyed by
//! `(base_seed, rep_index)`, so results do not depend on scheduling, and
//! records are aggregated in replication order.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dgp::{self, ScenarioSpec};
use crate::error::{Error, Result};
use crate::linmodel::{fit_2sls, fit_ols, Dataset, OlsFit};
use crate::rng;
use crate::variance::{
    self, critical_value, default_bandwidth, CriticalDist, Estimator, HcVariant, Theorem, VarianceEstimate,
};

/// Share of excluded replications above which a run is rejected.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.01;

/// Interval settings shared by every replication of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalOptions {
    pub level: f64,
    /// Student-t critical values with `n − 1 − d_w` degrees of freedom.
    pub t_dist: bool,
}

impl Default for IntervalOptions {
    fn default() -> Self {
        Self {
            level: 0.95,
            t_dist: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodRecord {
    pub method: Estimator,
    /// Point estimate the interval is centred on (`β̂_2SLS` for `tsls`).
    pub estimate: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub covered: bool,
    pub rejected_at_5pct: bool,
    /// Standard error numerically zero relative to the estimate.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub rep_index: u64,
    /// OLS, or 2SLS when the scenario has an instrument.
    pub beta_hat: f64,
    pub methods: Vec<MethodRecord>,
    /// Set when the replication failed; `methods` is then empty.
    pub error: Option<String>,
}

impl ReplicationRecord {
    /// Failed, or some method produced a degenerate interval.
    pub fn excluded(&self) -> bool {
        self.error.is_some() || self.methods.iter().any(|m| m.degenerate)
    }

    pub fn method(&self, method: Estimator) -> Option<&MethodRecord> {
        self.methods.iter().find(|m| m.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Estimator,
    pub mean_estimate: f64,
    pub mean_se: f64,
    /// Mean of the estimated `Var(β̂)`.
    pub mean_var: f64,
    pub coverage: f64,
    pub rejection_rate: f64,
    /// `sqrt(coverage (1 − coverage) / R)`.
    pub mc_se: f64,
    /// `mean_se² · n / oracle_asy_var`.
    pub variance_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub scenario: Option<String>,
    pub n: usize,
    /// Replications attempted.
    pub replications: usize,
    /// Replications entering the summaries.
    pub used: usize,
    pub excluded: usize,
    pub failed: usize,
    pub beta_true: f64,
    pub beta_mean: f64,
    pub beta_sd: f64,
    pub theorem: Option<Theorem>,
    pub oracle_asy_var: Option<f64>,
    /// `n · beta_sd²`.
    pub empirical_asy_var: f64,
    /// Monte Carlo standard error of `empirical_asy_var`.
    pub empirical_asy_var_mc_se: f64,
    pub methods: Vec<MethodSummary>,
}

impl ScenarioResult {
    pub fn method(&self, method: Estimator) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

fn is_degenerate(se: f64, estimate: f64) -> bool {
    !(se > 1e-10 * (1.0 + estimate.abs()))
}

/// Variance estimate for one method on one dataset.
pub fn apply_estimator(
    method: Estimator,
    spec: &ScenarioSpec,
    data: &Dataset,
    fit: &OlsFit,
) -> Result<(f64, VarianceEstimate)> {
    let beta = fit.beta_hat();
    let est = match method {
        Estimator::Classic => variance::var_classic(fit),
        Estimator::Hc0 => variance::var_hc(fit, data, HcVariant::HC0)?,
        Estimator::Hc1 => variance::var_hc(fit, data, HcVariant::HC1)?,
        Estimator::Cluster { key, adjust } => variance::var_cluster(fit, data, &spec.cluster_ids(key)?, adjust)?,
        Estimator::HacNw { bandwidth } => {
            variance::var_hac_nw(fit, data, bandwidth.unwrap_or_else(|| default_bandwidth(data.n())))?
        }
        Estimator::Tsls => {
            let t = fit_2sls(data)?;
            return Ok((t.beta_2sls, variance::var_2sls(&t)));
        }
    };
    Ok((beta, est))
}

/// Fits, applies every method of `spec`, and scores intervals against `beta_true`.
pub fn score_dataset(
    spec: &ScenarioSpec,
    data: &Dataset,
    beta_true: f64,
    opts: IntervalOptions,
) -> Result<(f64, Vec<MethodRecord>)> {
    let fit = fit_ols(data)?;
    let dist = if opts.t_dist {
        CriticalDist::StudentT {
            df: (data.n() - fit.k()) as f64,
        }
    } else {
        CriticalDist::Normal
    };
    let z = critical_value(opts.level, dist)?;
    let z05 = critical_value(0.95, dist)?;
    let mut primary = fit.beta_hat();
    let mut records = Vec::with_capacity(spec.methods.len());
    for &method in &spec.methods {
        let (estimate, var) = apply_estimator(method, spec, data, &fit)?;
        if method == Estimator::Tsls {
            primary = estimate;
        }
        let (ci_lo, ci_hi) = (estimate - z * var.se, estimate + z * var.se);
        records.push(MethodRecord {
            method,
            estimate,
            se: var.se,
            ci_lo,
            ci_hi,
            covered: ci_lo <= beta_true && beta_true <= ci_hi,
            rejected_at_5pct: (estimate - beta_true).abs() > z05 * var.se,
            degenerate: is_degenerate(var.se, estimate),
        });
    }
    if spec.iv.is_some() && !spec.methods.contains(&Estimator::Tsls) {
        primary = fit_2sls(data)?.beta_2sls;
    }
    Ok((primary, records))
}

/// One replication on the stream `rng::derive(base_seed, rep_index)`.
/// Errors are recorded in the result rather than returned.
pub fn run_replication(spec: &ScenarioSpec, base_seed: u64, rep_index: u64) -> ReplicationRecord {
    run_replication_with(spec, base_seed, rep_index, IntervalOptions::default())
}

pub fn run_replication_with(
    spec: &ScenarioSpec,
    base_seed: u64,
    rep_index: u64,
    opts: IntervalOptions,
) -> ReplicationRecord {
    let outcome = dgp::simulate(spec, rng::derive(base_seed, rep_index))
        .and_then(|draw| score_dataset(spec, &draw.dataset, spec.beta_true(), opts));
    match outcome {
        Ok((beta_hat, methods)) => ReplicationRecord {
            rep_index,
            beta_hat,
            methods,
            error: None,
        },
        Err(e) => ReplicationRecord {
            rep_index,
            beta_hat: f64::NAN,
            methods: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

/// Runs `replications` draws on at most `parallelism` threads (0 picks the
/// machine default). The result does not depend on `parallelism`.
pub fn run_scenario(spec: &ScenarioSpec, replications: usize, base_seed: u64, parallelism: usize) -> Result<ScenarioResult> {
    let records = run_records(spec, replications, base_seed, parallelism, IntervalOptions::default())?;
    summarize(spec, &records)
}

/// All replication records, in replication order.
pub fn run_records(
    spec: &ScenarioSpec,
    replications: usize,
    base_seed: u64,
    parallelism: usize,
    opts: IntervalOptions,
) -> Result<Vec<ReplicationRecord>> {
    if replications == 0 {
        return Err(Error::InvalidSpec("at least one replication is required".into()));
    }
    spec.validate()?;
    critical_value(opts.level, CriticalDist::Normal)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(|| {
        (0..replications as u64)
            .into_par_iter()
            .map(|r| run_replication_with(spec, base_seed, r, opts))
            .collect()
    }))
}

/// Aggregates records (in the given order) against the scenario truth.
pub fn summarize(spec: &ScenarioSpec, records: &[ReplicationRecord]) -> Result<ScenarioResult> {
    let total = records.len();
    if total == 0 {
        return Err(Error::EmptyRecords);
    }
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    if failed == total {
        return Err(Error::AllReplicationsFailed(total));
    }
    let used: Vec<&ReplicationRecord> = records.iter().filter(|r| !r.excluded()).collect();
    let excluded = total - used.len();
    if excluded as f64 > MAX_EXCLUDED_FRACTION * total as f64 {
        if let Some(e) = records.iter().find_map(|r| r.error.as_deref()) {
            log::error!("first failed replication: {e}");
        }
        return Err(Error::ExcessiveExclusions { excluded, total });
    }

    let truth = spec.truth()?;
    let n = spec.n;
    let r = used.len() as f64;
    let betas: Vec<f64> = used.iter().map(|rec| rec.beta_hat).collect();
    let beta_mean = betas.iter().sum::<f64>() / r;
    let (mut m2, mut m4) = (0.0, 0.0);
    for b in &betas {
        let c = (b - beta_mean) * (b - beta_mean);
        m2 += c;
        m4 += c * c;
    }
    let s2 = if used.len() > 1 { m2 / (r - 1.0) } else { 0.0 };
    // SE of a sample variance: sqrt((μ₄ − σ⁴ (R−3)/(R−1)) / R)
    let var_s2 = if used.len() > 3 {
        ((m4 / r - s2 * s2 * (r - 3.0) / (r - 1.0)) / r).max(0.0)
    } else {
        f64::NAN
    };
    let oracle = truth.oracle.as_ref().map(|o| o.asy_var);

    let methods = spec
        .methods
        .iter()
        .map(|&method| {
            let mut acc = [0.0; 5];
            for rec in &used {
                let m = rec.method(method).expect("every method is recorded");
                acc[0] += m.estimate;
                acc[1] += m.se;
                acc[2] += m.se * m.se;
                acc[3] += m.covered as u8 as f64;
                acc[4] += m.rejected_at_5pct as u8 as f64;
            }
            let coverage = acc[3] / r;
            let mean_se = acc[1] / r;
            MethodSummary {
                method,
                mean_estimate: acc[0] / r,
                mean_se,
                mean_var: acc[2] / r,
                coverage,
                rejection_rate: acc[4] / r,
                mc_se: (coverage * (1.0 - coverage) / r).sqrt(),
                variance_ratio: oracle.map(|o| mean_se * mean_se * n as f64 / o),
            }
        })
        .collect();

    Ok(ScenarioResult {
        scenario: spec.name.clone(),
        n,
        replications: total,
        used: used.len(),
        excluded,
        failed,
        beta_true: truth.beta_true,
        beta_mean,
        beta_sd: s2.sqrt(),
        theorem: truth.oracle.as_ref().map(|o| o.theorem),
        oracle_asy_var: oracle,
        empirical_asy_var: n as f64 * s2,
        empirical_asy_var_mc_se: n as f64 * var_s2.sqrt(),
        methods,
    })
}

/// Share of records whose interval for `method` contains `beta_true`.
/// Records without that method (failed replications) are skipped.
pub fn coverage(records: &[ReplicationRecord], beta_true: f64, method: Estimator) -> Result<f64> {
    let hits: Vec<bool> = records
        .iter()
        .filter_map(|r| r.method(method))
        .map(|m| m.ci_lo <= beta_true && beta_true <= m.ci_hi)
        .collect();
    if hits.is_empty() {
        return Err(Error::EmptyRecords);
    }
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
}

/// Provenance written next to every summary. Contains nothing that varies
/// between runs of the same inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetadata {
    pub library_version: &'static str,
    pub derivation_version: &'static str,
    /// SHA-256 of the scenario serialized as JSON.
    pub spec_hash: String,
    pub base_seed: u64,
    pub replications: usize,
    pub level: f64,
    pub t_dist: bool,
}

impl RunMetadata {
    pub fn new(spec: &ScenarioSpec, base_seed: u64, replications: usize, opts: IntervalOptions) -> Result<Self> {
        Ok(Self {
            library_version: env!("CARGO_PKG_VERSION"),
            derivation_version: rng::DERIVATION_VERSION,
            spec_hash: spec_hash(spec)?,
            base_seed,
            replications,
            level: opts.level,
            t_dist: opts.t_dist,
        })
    }
}

pub fn spec_hash(spec: &ScenarioSpec) -> Result<String> {
    let bytes = serde_json::to_vec(spec)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    scenario: &'a str,
    n: usize,
    replications: usize,
    used: usize,
    excluded: usize,
    method: String,
    beta_true: f64,
    beta_mean: f64,
    beta_sd: f64,
    mean_estimate: f64,
    mean_se: f64,
    coverage: f64,
    mc_se: f64,
    rejection_rate: f64,
    oracle_asy_var: Option<f64>,
    empirical_asy_var: f64,
    empirical_asy_var_mc_se: f64,
    variance_ratio: Option<f64>,
}

/// One row per method.
pub fn write_summary_csv<W: Write>(result: &ScenarioResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for m in &result.methods {
        w.serialize(SummaryRow {
            scenario: result.scenario.as_deref().unwrap_or(""),
            n: result.n,
            replications: result.replications,
            used: result.used,
            excluded: result.excluded,
            method: m.method.to_string(),
            beta_true: result.beta_true,
            beta_mean: result.beta_mean,
            beta_sd: result.beta_sd,
            mean_estimate: m.mean_estimate,
            mean_se: m.mean_se,
            coverage: m.coverage,
            mc_se: m.mc_se,
            rejection_rate: m.rejection_rate,
            oracle_asy_var: result.oracle_asy_var,
            empirical_asy_var: result.empirical_asy_var,
            empirical_asy_var_mc_se: result.empirical_asy_var_mc_se,
            variance_ratio: m.variance_ratio,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ReplicationRow<'a> {
    rep_index: u64,
    beta_hat: f64,
    method: String,
    estimate: f64,
    se: f64,
    ci_lo: f64,
    ci_hi: f64,
    covered: bool,
    rejected_at_5pct: bool,
    degenerate: bool,
    error: &'a str,
}

/// One row per replication and method; failed replications get one row
/// carrying the error message.
pub fn write_replications_csv<W: Write>(records: &[ReplicationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        if let Some(e) = &r.error {
            w.serialize(ReplicationRow {
                rep_index: r.rep_index,
                beta_hat: f64::NAN,
                method: String::new(),
                estimate: f64::NAN,
                se: f64::NAN,
                ci_lo: f64::NAN,
                ci_hi: f64::NAN,
                covered: false,
                rejected_at_5pct: false,
                degenerate: false,
                error: e,
            })?;
        }
        for m in &r.methods {
            w.serialize(ReplicationRow {
                rep_index: r.rep_index,
                beta_hat: r.beta_hat,
                method: m.method.to_string(),
                estimate: m.estimate,
                se: m.se,
                ci_lo: m.ci_lo,
                ci_hi: m.ci_hi,
                covered: m.covered,
                rejected_at_5pct: m.rejected_at_5pct,
                degenerate: m.degenerate,
                error: "",
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    metadata: &'a RunMetadata,
    spec: &'a ScenarioSpec,
    result: &'a ScenarioResult,
}

/// Summary, scenario, and metadata as pretty-printed JSON.
pub fn write_summary_json<W: Write>(
    result: &ScenarioResult,
    spec: &ScenarioSpec,
    metadata: &RunMetadata,
    mut out: W,
) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, &SummaryDocument { metadata, spec, result })?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{AssignmentLevel, EffectSpec, ErrorProcessSpec, TreatmentDist, TreatmentSpec};

    fn small_spec() -> ScenarioSpec {
        ScenarioSpec {
            name: Some("small".into()),
            n: 60,
            group_sizes: None,
            error0: ErrorProcessSpec::Iid { sigma: 1.0 },
            treatment: TreatmentSpec {
                level: AssignmentLevel::Unit,
                dist: TreatmentDist::Bernoulli { p: 0.5 },
            },
            effect: EffectSpec::Constant { tau: 1.0 },
            controls: vec![],
            gamma_true: vec![0.0],
            alpha_dw: None,
            iv: None,
            methods: vec![Estimator::Classic, Estimator::Hc0],
        }
    }

    fn record(lo: f64, hi: f64) -> ReplicationRecord {
        ReplicationRecord {
            rep_index: 0,
            beta_hat: 0.5 * (lo + hi),
            methods: vec![MethodRecord {
                method: Estimator::Classic,
                estimate: 0.5 * (lo + hi),
                se: 1.0,
                ci_lo: lo,
                ci_hi: hi,
                covered: lo <= 0.0 && 0.0 <= hi,
                rejected_at_5pct: false,
                degenerate: false,
            }],
            error: None,
        }
    }

    #[test]
    fn coverage_counts() {
        let all: Vec<_> = (0..4).map(|_| record(-1.0, 1.0)).collect();
        assert_eq!(coverage(&all, 0.0, Estimator::Classic).unwrap(), 1.0);
        let none: Vec<_> = (0..4).map(|_| record(1.0, 2.0)).collect();
        assert_eq!(coverage(&none, 0.0, Estimator::Classic).unwrap(), 0.0);
        let half: Vec<_> = (0..10).map(|i| if i % 2 == 0 { record(-1.0, 1.0) } else { record(1.0, 2.0) }).collect();
        assert_eq!(coverage(&half, 0.0, Estimator::Classic).unwrap(), 0.5);
        assert!(matches!(coverage(&[], 0.0, Estimator::Classic), Err(Error::EmptyRecords)));
    }

    #[test]
    fn replication_is_deterministic() {
        let spec = small_spec();
        assert_eq!(run_replication(&spec, 5, 17), run_replication(&spec, 5, 17));
        assert_ne!(run_replication(&spec, 5, 17), run_replication(&spec, 5, 18));
    }

    #[test]
    fn noiseless_replication_is_exact_and_degenerate() {
        let mut spec = small_spec();
        spec.error0 = ErrorProcessSpec::Iid { sigma: 0.0 };
        let rec = run_replication(&spec, 1, 0);
        assert!(rec.error.is_none());
        assert!((rec.beta_hat - 1.0).abs() < 1e-12);
        assert!(rec.methods.iter().all(|m| m.degenerate && m.se < 1e-12));
        assert!(matches!(
            run_scenario(&spec, 10, 1, 1),
            Err(Error::ExcessiveExclusions { excluded: 10, total: 10 })
        ));
    }

    #[test]
    fn thread_count_does_not_matter() {
        let spec = small_spec();
        let a = run_scenario(&spec, 50, 9, 1).unwrap();
        let b = run_scenario(&spec, 50, 9, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.used, 50);
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_summary_csv(&a, &mut csv_a).unwrap();
        write_summary_csv(&b, &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn summary_mc_se_matches_coverage() {
        let spec = small_spec();
        let res = run_scenario(&spec, 40, 3, 2).unwrap();
        for m in &res.methods {
            assert!((0.0..=1.0).contains(&m.coverage));
            assert_eq!(m.mc_se, (m.coverage * (1.0 - m.coverage) / 40.0).sqrt());
        }
        assert!(matches!(run_scenario(&spec, 0, 3, 1), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn failures_are_counted() {
        let spec = small_spec();
        let mut records: Vec<_> = (0..200).map(|r| run_replication(&spec, 2, r)).collect();
        records[7] = ReplicationRecord {
            rep_index: 7,
            beta_hat: f64::NAN,
            methods: vec![],
            error: Some("boom".into()),
        };
        let res = summarize(&spec, &records).unwrap();
        assert_eq!((res.failed, res.excluded, res.used), (1, 1, 199));
        for r in records.iter_mut().take(3) {
            r.error = Some("boom".into());
            r.methods.clear();
        }
        assert!(matches!(summarize(&spec, &records), Err(Error::ExcessiveExclusions { .. })));
        for r in records.iter_mut() {
            r.error = Some("boom".into());
            r.methods.clear();
        }
        assert!(matches!(summarize(&spec, &records), Err(Error::AllReplicationsFailed(200))));
    }
}
