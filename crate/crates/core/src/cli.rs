//! Command-line driver behind the `randse` binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or scenario error, 3 a
//! `--assert` check failed.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dgp::{self, ScenarioSpec, DEFAULT_N};
use crate::diagnostics::{self, DiagnosticsReport, LemmaMode};
use crate::error::{Error, Result};
use crate::linmodel::{fit_2sls, fit_ols, Dataset};
use crate::montecarlo::{self, IntervalOptions, RunMetadata};
use crate::rng;
use crate::variance::{self, critical_value, default_bandwidth, CriticalDist, Estimator, HcVariant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_ASSERT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "randse", version, about = "Standard errors under random assignment: estimate, diagnose, simulate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo coverage study of a preset or configured scenario.
    Simulate(SimulateArgs),
    /// Point estimate and standard errors for a CSV dataset.
    Estimate(EstimateArgs),
    /// Design and score diagnostics for a CSV dataset.
    Diagnose(DiagnoseArgs),
    /// Distribution of the AR(1) variance ratio over random treatment vectors.
    LemmaCheck(LemmaArgs),
    /// Built-in scenarios and their expected coverage bands.
    ListPresets,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Built-in scenario to start from.
    #[arg(long)]
    preset: Option<String>,
    /// TOML file with scenario fields and an optional [run] table.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Scenario override as a dotted key, e.g. `error0.rho=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Sample size.
    #[arg(long)]
    n: Option<usize>,
    /// Replications.
    #[arg(long = "R", value_name = "R")]
    replications: Option<usize>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "RANDSE_THREADS")]
    parallelism: Option<usize>,
    /// Comma-separated variance methods, replacing the scenario's list.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Estimator>>,
    /// Output directory for summary.csv and summary.json.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write replications.csv.
    #[arg(long)]
    per_rep: bool,
    /// Confidence level.
    #[arg(long)]
    level: Option<f64>,
    /// Student-t critical values instead of normal.
    #[arg(long)]
    t_dist: bool,
    /// Exit with status 3 when a preset coverage band is violated.
    #[arg(long)]
    assert: bool,
}

/// The `[run]` table of a config file; keys mirror the `simulate` flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    #[serde(rename = "R")]
    replications: Option<usize>,
    seed: Option<u64>,
    parallelism: Option<usize>,
    methods: Option<Vec<Estimator>>,
    out: Option<PathBuf>,
    per_rep: Option<bool>,
    level: Option<f64>,
    t_dist: Option<bool>,
    assert: Option<bool>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// CSV with columns y, d, w1..wk and optional group, v.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Comma-separated variance methods.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Estimator>>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    t_dist: bool,
    /// Newey–West lag for `hac` without an explicit `hac:<L>`.
    #[arg(long)]
    bandwidth: Option<usize>,
    /// Apply the small-sample factor to every cluster method.
    #[arg(long)]
    cluster_adjust: bool,
    /// Output directory for estimates.csv and estimates.json.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Largest lag of the score cross-product statistics.
    #[arg(long, default_value_t = 10)]
    max_lag: usize,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Output directory for diagnostics.json.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LemmaArgs {
    /// AR(1) coefficient of the error autocovariance.
    #[arg(long, default_value_t = 0.6)]
    rho: f64,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    /// Number of treatment vectors.
    #[arg(long, default_value_t = 200)]
    seeds: usize,
    /// Base seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Autocovariance horizon; by default the lag where ρ^h drops below 1e-12.
    #[arg(long)]
    horizon: Option<usize>,
    /// Demean d before forming the ratio.
    #[arg(long)]
    demean: bool,
    /// Exit with status 3 unless the mean is within [0.97, 1.03] and 95% of
    /// ratios lie in [0.9, 1.1].
    #[arg(long)]
    assert: bool,
    /// Output directory for lemma.csv.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(Error),
    Assert(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Diagnose(a) => diagnose(a),
        Command::LemmaCheck(a) => lemma_check(a),
        Command::ListPresets => list_presets(),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            EXIT_DATA
        }
        Err(Failure::Assert(msg)) => {
            eprintln!("assertion failed: {msg}");
            EXIT_ASSERT
        }
    }
}

fn create_file(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Data(Error::Config(msg.into()))
}

/// Parses a `--set` value as TOML, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').map(str::trim).collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Config(format!("empty key in `{key}`")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{p}` in `{key}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn spec_to_table(spec: &ScenarioSpec) -> Result<toml::Table> {
    toml::Table::try_from(spec).map_err(|e| Error::Config(format!("cannot represent scenario as TOML: {e}")))
}

struct Resolved {
    spec: ScenarioSpec,
    preset: Option<String>,
    run: RunSection,
}

/// Builds the scenario with precedence: flags > `--set` > config file > preset defaults.
fn resolve_scenario(args: &SimulateArgs) -> CliResult<Resolved> {
    let mut file_table = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(Error::from)?;
            toml::from_str::<toml::Table>(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    let run: RunSection = match file_table.remove("run") {
        Some(v) => v.try_into().map_err(|e| config_err(format!("[run]: {e}")))?,
        None => RunSection::default(),
    };
    let file_preset = match file_table.remove("preset") {
        Some(toml::Value::String(s)) => Some(s),
        Some(_) => return Err(config_err("`preset` must be a string")),
        None => None,
    };
    let preset = args.preset.clone().or(file_preset);

    let mut table = match &preset {
        Some(name) => spec_to_table(&dgp::preset(name, None)?)?,
        None => toml::Table::new(),
    };
    if preset.is_none() && args.config.is_none() {
        return Err(Failure::Usage("simulate needs --preset or --config".into()));
    }
    merge(&mut table, file_table);
    for item in &args.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got `{item}`")))?;
        set_dotted(&mut table, k, parse_value(v.trim()))?;
    }
    if let Some(n) = args.n {
        table.insert("n".into(), toml::Value::Integer(n as i64));
    }
    let mut spec: ScenarioSpec = table
        .try_into()
        .map_err(|e: toml::de::Error| config_err(format!("scenario: {}", e.to_string().trim())))?;
    if let Some(m) = args.methods.clone().or_else(|| run.methods.clone()) {
        spec.methods = m;
    }
    spec.validate()?;
    Ok(Resolved { spec, preset, run })
}

fn simulate(args: SimulateArgs) -> CliResult<()> {
    let Resolved { spec, preset, run } = resolve_scenario(&args)?;
    let replications = args.replications.or(run.replications).unwrap_or(1000);
    let seed = args.seed.or(run.seed).unwrap_or(1);
    let parallelism = args.parallelism.or(run.parallelism).unwrap_or(0);
    let out = args.out.clone().or(run.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    let per_rep = args.per_rep || run.per_rep.unwrap_or(false);
    let assert = args.assert || run.assert.unwrap_or(false);
    let opts = IntervalOptions {
        level: args.level.or(run.level).unwrap_or(0.95),
        t_dist: args.t_dist || run.t_dist.unwrap_or(false),
    };

    let metadata = RunMetadata::new(&spec, seed, replications, opts)?;
    println!("# randse simulate (precedence: flags > --set > config > preset defaults)");
    println!(
        "# scenario {} n={} R={replications} seed={seed} parallelism={} level={}",
        spec.name.as_deref().unwrap_or("(unnamed)"),
        spec.n,
        if parallelism == 0 { "auto".to_string() } else { parallelism.to_string() },
        opts.level
    );
    println!("# spec sha256 {}", metadata.spec_hash);

    let records = montecarlo::run_records(&spec, replications, seed, parallelism, opts)?;
    let result = montecarlo::summarize(&spec, &records)?;

    println!(
        "beta_true {:.6}  beta_mean {:.6}  beta_sd {:.6}  used {}/{} (excluded {})",
        result.beta_true, result.beta_mean, result.beta_sd, result.used, result.replications, result.excluded
    );
    match result.oracle_asy_var {
        Some(o) => println!(
            "oracle asy var {o:.6} ({:?})  empirical n*Var(beta_hat) {:.6} +/- {:.6}",
            result.theorem.expect("set with oracle"),
            result.empirical_asy_var,
            result.empirical_asy_var_mc_se
        ),
        None => println!("oracle asy var undefined  empirical n*Var(beta_hat) {:.6}", result.empirical_asy_var),
    }
    println!(
        "{:<20} {:>10} {:>10} {:>9} {:>8} {:>9} {:>10}",
        "method", "mean_est", "mean_se", "coverage", "mc_se", "reject5", "var_ratio"
    );
    for m in &result.methods {
        println!(
            "{:<20} {:>10.5} {:>10.5} {:>9.4} {:>8.4} {:>9.4} {:>10}",
            m.method.to_string(),
            m.mean_estimate,
            m.mean_se,
            m.coverage,
            m.mc_se,
            m.rejection_rate,
            m.variance_ratio.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
        );
    }

    montecarlo::write_summary_csv(&result, create_file(&out, "summary.csv")?)?;
    montecarlo::write_summary_json(&result, &spec, &metadata, create_file(&out, "summary.json")?)?;
    if per_rep {
        montecarlo::write_replications_csv(&records, create_file(&out, "replications.csv")?)?;
    }
    println!("# wrote {}", out.display());

    if assert {
        let info = match &preset {
            Some(p) => dgp::preset_info(p)?,
            None => return Err(Failure::Usage("--assert needs a preset with coverage bands".into())),
        };
        if spec.n != DEFAULT_N {
            log::warn!("coverage bands are calibrated at n = {DEFAULT_N}");
        }
        let mut violations = Vec::new();
        for band in info.bands {
            if let Some(m) = result.method(band.method) {
                let ok = band.lo <= m.coverage && m.coverage <= band.hi;
                println!(
                    "[{}] {} coverage {:.4} in [{:.3}, {:.3}]",
                    if ok { "PASS" } else { "FAIL" },
                    band.method,
                    m.coverage,
                    band.lo,
                    band.hi
                );
                if !ok {
                    violations.push(format!("{} coverage {:.4}", band.method, m.coverage));
                }
            }
        }
        if !violations.is_empty() {
            return Err(Failure::Assert(violations.join(", ")));
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct EstimateRow {
    method: String,
    beta_hat: f64,
    se: f64,
    ci_lo: f64,
    ci_hi: f64,
}

fn estimate_rows(data: &Dataset, args: &EstimateArgs) -> Result<Vec<EstimateRow>> {
    let fit = fit_ols(data)?;
    let methods = args.methods.clone().unwrap_or_else(|| {
        let mut m = vec![
            Estimator::Classic,
            Estimator::Hc0,
            Estimator::Hc1,
            Estimator::HacNw { bandwidth: None },
        ];
        if data.group_ids().is_some() {
            m.push(Estimator::Cluster {
                key: dgp::ClusterKey::Assignment,
                adjust: args.cluster_adjust,
            });
        }
        if data.v().is_some() {
            m.push(Estimator::Tsls);
        }
        m
    });
    let dist = if args.t_dist {
        CriticalDist::StudentT {
            df: (data.n() - fit.k()) as f64,
        }
    } else {
        CriticalDist::Normal
    };
    let z = critical_value(args.level, dist)?;
    let mut rows = Vec::new();
    for method in methods {
        let (beta, est) = match method {
            Estimator::Classic => (fit.beta_hat(), variance::var_classic(&fit)),
            Estimator::Hc0 => (fit.beta_hat(), variance::var_hc(&fit, data, HcVariant::HC0)?),
            Estimator::Hc1 => (fit.beta_hat(), variance::var_hc(&fit, data, HcVariant::HC1)?),
            Estimator::Cluster { adjust, .. } => {
                let ids = data
                    .group_ids()
                    .ok_or_else(|| Error::InvalidData("cluster methods need a `group` column".into()))?;
                (
                    fit.beta_hat(),
                    variance::var_cluster(&fit, data, ids, adjust || args.cluster_adjust)?,
                )
            }
            Estimator::HacNw { bandwidth } => {
                let l = bandwidth.or(args.bandwidth).unwrap_or_else(|| default_bandwidth(data.n()));
                (fit.beta_hat(), variance::var_hac_nw(&fit, data, l)?)
            }
            Estimator::Tsls => {
                let t = fit_2sls(data)?;
                (t.beta_2sls, variance::var_2sls(&t))
            }
        };
        let label = match method {
            Estimator::Cluster { key, adjust } => Estimator::Cluster {
                key,
                adjust: adjust || args.cluster_adjust,
            }
            .to_string(),
            Estimator::HacNw { bandwidth } => {
                format!("hac:{}", bandwidth.or(args.bandwidth).unwrap_or_else(|| default_bandwidth(data.n())))
            }
            m => m.to_string(),
        };
        rows.push(EstimateRow {
            method: label,
            beta_hat: beta,
            se: est.se,
            ci_lo: beta - z * est.se,
            ci_hi: beta + z * est.se,
        });
    }
    Ok(rows)
}

fn estimate(args: EstimateArgs) -> CliResult<()> {
    let data = Dataset::from_csv_path(&args.data)?;
    let rows = estimate_rows(&data, &args)?;
    println!("# n={} d_w={} level={}", data.n(), data.d_w(), args.level);
    println!("{:<16} {:>14} {:>14} {:>14} {:>14}", "method", "beta_hat", "se", "ci_lo", "ci_hi");
    for r in &rows {
        println!(
            "{:<16} {:>14.8} {:>14.8} {:>14.8} {:>14.8}",
            r.method, r.beta_hat, r.se, r.ci_lo, r.ci_hi
        );
    }
    if let Some(out) = &args.out {
        let mut w = csv::Writer::from_writer(create_file(out, "estimates.csv")?);
        for r in &rows {
            w.serialize(r).map_err(Error::from)?;
        }
        w.flush().map_err(Error::from)?;
        let mut f = create_file(out, "estimates.json")?;
        serde_json::to_writer_pretty(&mut f, &rows).map_err(Error::from)?;
        writeln!(f).map_err(Error::from)?;
    }
    Ok(())
}

fn render_report(r: &DiagnosticsReport) -> String {
    let mut s = String::new();
    let flags: Vec<String> = r.flags.iter().map(|f| format!("{f:?}")).collect();
    s += &format!("{:<22} {}\n", "n", r.n);
    s += &format!("{:<22} {:.6e}\n", "lambda_min(W'W/n)", r.lambda_min_w);
    s += &format!("{:<22} {:.6e}\n", "trace(W'W/n)", r.trace_w);
    s += &format!("{:<22} {}\n", "has_constant", r.has_constant);
    s += &format!(
        "{:<22} mean {:.6}  var {:.6}  m4 {:.6}\n",
        "d moments", r.d_moments.mean, r.d_moments.variance, r.d_moments.central4
    );
    s += &format!("{:<22} {}\n", "flags", if flags.is_empty() { "none".into() } else { flags.join(", ") });
    if !r.notes.is_empty() {
        s += &format!("{:<22} {}\n", "notes", r.notes);
    }
    if !r.martingale_stats.is_empty() {
        s += &format!("{:>5} {:>14} {:>14} {:>8}\n", "lag", "statistic", "se", "|t|>3");
        for m in &r.martingale_stats {
            s += &format!(
                "{:>5} {:>14.6e} {:>14.6e} {:>8}\n",
                m.lag,
                m.statistic,
                m.se,
                if m.exceeds(3.0) { "yes" } else { "no" }
            );
        }
    }
    s
}

fn diagnose(args: DiagnoseArgs) -> CliResult<()> {
    let data = Dataset::from_csv_path(&args.data)?;
    let mut report = diagnostics::check_assumptions(&data);
    match fit_ols(&data) {
        Ok(fit) => {
            let lag = args.max_lag.min(data.n().saturating_sub(1) / 2);
            report.martingale_stats = diagnostics::martingale_check(data.d().as_slice(), fit.residuals.as_slice(), lag)?;
        }
        Err(e) => {
            let note = format!("score statistics skipped: {e}");
            report.notes = if report.notes.is_empty() { note } else { format!("{}; {note}", report.notes) };
        }
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    } else {
        print!("{}", render_report(&report));
    }
    if let Some(out) = &args.out {
        let mut f = create_file(out, "diagnostics.json")?;
        serde_json::to_writer_pretty(&mut f, &report).map_err(Error::from)?;
        writeln!(f).map_err(Error::from)?;
    }
    Ok(())
}

/// Unit-variance AR(1) autocovariances `ρ^h`, `h = 0..=horizon`.
pub fn ar1_gamma(rho: f64, horizon: usize) -> Vec<f64> {
    (0..=horizon).map(|h| rho.powi(h as i32)).collect()
}

/// Smallest `h` with `|ρ|^h < 1e-12`.
pub fn ar1_horizon(rho: f64) -> usize {
    if rho == 0.0 {
        return 0;
    }
    ((1e-12f64).ln() / rho.abs().ln()).ceil().max(1.0) as usize
}

/// Ratios for `seeds` standard normal treatment vectors of length `n`.
pub fn lemma_ratios(rho: f64, n: usize, seeds: usize, base_seed: u64, horizon: usize, mode: LemmaMode) -> Result<Vec<f64>> {
    let gamma = ar1_gamma(rho, horizon);
    (0..seeds as u64)
        .map(|s| {
            let mut rng = rng::stream(rng::derive(base_seed, s), rng::component::LEMMA);
            let d: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            diagnostics::lemma_ratio_with(&d, &gamma, mode)
        })
        .collect()
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn lemma_check(args: LemmaArgs) -> CliResult<()> {
    if !(args.rho.abs() < 1.0) {
        return Err(Failure::Usage(format!("--rho must lie in (-1, 1), got {}", args.rho)));
    }
    if args.seeds == 0 || args.n < 2 {
        return Err(Failure::Usage("--seeds must be positive and --n at least 2".into()));
    }
    let horizon = args.horizon.unwrap_or_else(|| ar1_horizon(args.rho)).min(args.n - 1);
    let mode = if args.demean { LemmaMode::Demeaned } else { LemmaMode::Raw };
    let ratios = lemma_ratios(args.rho, args.n, args.seeds, args.seed, horizon, mode)?;
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    let k = ratios.len() as f64;
    let mean = ratios.iter().sum::<f64>() / k;
    let sd = (ratios.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (k - 1.0).max(1.0)).sqrt();
    let inside = ratios.iter().filter(|r| (0.9..=1.1).contains(*r)).count() as f64 / k;
    println!(
        "# lemma ratio: rho={} n={} seeds={} horizon={horizon} mode={:?}",
        args.rho, args.n, args.seeds, mode
    );
    println!("{:<14} {:.6}", "mean", mean);
    println!("{:<14} {:.6}", "sd", sd);
    println!("{:<14} {:.6}", "min", sorted[0]);
    println!("{:<14} {:.6}", "q05", quantile(&sorted, 0.05));
    println!("{:<14} {:.6}", "median", quantile(&sorted, 0.5));
    println!("{:<14} {:.6}", "q95", quantile(&sorted, 0.95));
    println!("{:<14} {:.6}", "max", sorted[sorted.len() - 1]);
    println!("{:<14} {:.4}", "in [0.9,1.1]", inside);
    if let Some(out) = &args.out {
        let mut w = csv::Writer::from_writer(create_file(out, "lemma.csv")?);
        w.write_record(["seed_index", "ratio"]).map_err(Error::from)?;
        for (i, r) in ratios.iter().enumerate() {
            w.write_record([i.to_string(), r.to_string()]).map_err(Error::from)?;
        }
        w.flush().map_err(Error::from)?;
    }
    if args.assert && !((0.97..=1.03).contains(&mean) && inside >= 0.95) {
        return Err(Failure::Assert(format!("mean {mean:.4}, share in [0.9, 1.1] {inside:.4}")));
    }
    Ok(())
}

fn list_presets() -> CliResult<()> {
    for p in dgp::PRESETS {
        println!("{}", p.name);
        println!("    {}", p.summary);
        for b in p.bands {
            println!("    expected {} coverage in [{:.3}, {:.3}] at n = {DEFAULT_N}", b.method, b.lo, b.hi);
        }
    }
    Ok(())
}
