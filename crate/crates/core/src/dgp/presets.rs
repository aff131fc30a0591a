//! Built-in scenarios, one per design the coverage study distinguishes.

use crate::dgp::{
    AssignmentLevel, ClusterKey, EffectSpec, ErrorProcessSpec, IvSpec, ScenarioSpec, Sizes, TreatmentDist,
    TreatmentSpec,
};
use crate::error::{Error, Result};
use crate::variance::Estimator;

/// Coverage band a preset is expected to satisfy for one estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageBand {
    pub method: Estimator,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct PresetInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub build: fn(usize) -> ScenarioSpec,
    /// Bands checked by `simulate --assert` at the default size.
    pub bands: &'static [CoverageBand],
}

const fn band(method: Estimator, lo: f64, hi: f64) -> CoverageBand {
    CoverageBand { method, lo, hi }
}

pub const DEFAULT_N: usize = 2000;

pub static PRESETS: &[PresetInfo] = &[
    PresetInfo {
        name: "strong-exog-ar1",
        summary: "AR(1) errors (rho 0.7), iid Bernoulli(0.5) treatment, constant effect, two AR(1) controls",
        build: strong_exog_ar1,
        bands: &[band(Estimator::Classic, 0.935, 0.965)],
    },
    PresetInfo {
        name: "hetero-iid-te",
        summary: "iid heterogeneous effects (var 4), Bernoulli(0.2) treatment, AR(1) baseline noise",
        build: hetero_iid_te,
        bands: &[band(Estimator::Hc0, 0.93, 0.965), band(Estimator::Classic, 0.0, 0.93)],
    },
    PresetInfo {
        name: "hetero-clustered-te",
        summary: "effects clustered in blocks of 10, baseline noise clustered in blocks of 50",
        build: hetero_clustered_te,
        bands: &[
            band(Estimator::Hc0, 0.0, 0.93),
            band(
                Estimator::Cluster {
                    key: ClusterKey::Effect,
                    adjust: false,
                },
                0.93,
                0.965,
            ),
        ],
    },
    PresetInfo {
        name: "group-assign-crosscorr",
        summary: "treatment assigned in groups of 5, AR(1) errors (rho 0.8) crossing group boundaries",
        build: group_assign_crosscorr,
        bands: &[band(
            Estimator::Cluster {
                key: ClusterKey::Assignment,
                adjust: false,
            },
            0.93,
            0.965,
        )],
    },
    PresetInfo {
        name: "iv-first-stage",
        summary: "Bernoulli(0.5) instrument, endogenous regressor with AR(1) first-stage error",
        build: iv_first_stage,
        bands: &[band(Estimator::Tsls, 0.93, 0.965)],
    },
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

pub fn preset_info(name: &str) -> Result<&'static PresetInfo> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        Error::Config(format!("unknown preset `{name}`; available: {}", preset_names().join(", ")))
    })
}

/// Builds a preset at sample size `n` (`None` for the default of 2000).
pub fn preset(name: &str, n: Option<usize>) -> Result<ScenarioSpec> {
    let info = preset_info(name)?;
    Ok((info.build)(n.unwrap_or(DEFAULT_N)))
}

fn unit_bernoulli(p: f64) -> TreatmentSpec {
    TreatmentSpec {
        level: AssignmentLevel::Unit,
        dist: TreatmentDist::Bernoulli { p },
    }
}

fn ar1(rho: f64, sigma: f64) -> ErrorProcessSpec {
    ErrorProcessSpec::Ar1 { rho, sigma }
}

/// AR(1) with unit marginal variance.
fn ar1_unit(rho: f64) -> ErrorProcessSpec {
    ar1(rho, (1.0 - rho * rho).sqrt())
}

fn strong_exog_ar1(n: usize) -> ScenarioSpec {
    ScenarioSpec {
        name: Some("strong-exog-ar1".into()),
        n,
        group_sizes: None,
        error0: ar1(0.7, 1.0),
        treatment: unit_bernoulli(0.5),
        effect: EffectSpec::Constant { tau: 1.0 },
        controls: vec![ar1(0.5, 1.0), ar1(0.8, 1.0)],
        gamma_true: vec![0.5, 1.0, -0.5],
        alpha_dw: None,
        iv: None,
        methods: vec![
            Estimator::Classic,
            Estimator::Hc0,
            Estimator::Hc1,
            Estimator::HacNw { bandwidth: None },
        ],
    }
}

fn hetero_iid_te(n: usize) -> ScenarioSpec {
    ScenarioSpec {
        name: Some("hetero-iid-te".into()),
        n,
        group_sizes: None,
        error0: ar1_unit(0.5),
        treatment: unit_bernoulli(0.2),
        effect: EffectSpec::HeterogeneousIid {
            mean_tau: 1.0,
            var_tau: 4.0,
        },
        controls: vec![ar1(0.5, 1.0)],
        gamma_true: vec![0.5, 1.0],
        alpha_dw: None,
        iv: None,
        methods: vec![Estimator::Classic, Estimator::Hc0, Estimator::Hc1],
    }
}

fn hetero_clustered_te(n: usize) -> ScenarioSpec {
    ScenarioSpec {
        name: Some("hetero-clustered-te".into()),
        n,
        group_sizes: None,
        error0: ErrorProcessSpec::ClusterRe {
            sigma_between: 0.5f64.sqrt(),
            sigma_within: 0.5f64.sqrt(),
            cluster_size: 50,
        },
        treatment: unit_bernoulli(0.5),
        effect: EffectSpec::HeterogeneousClustered {
            mean_tau: 1.0,
            var_between: 1.0,
            var_within: 0.25,
            cluster_sizes: Sizes::Uniform(10),
        },
        controls: vec![ErrorProcessSpec::Iid { sigma: 1.0 }],
        gamma_true: vec![0.5, 1.0],
        alpha_dw: None,
        iv: None,
        methods: vec![
            Estimator::Classic,
            Estimator::Hc0,
            Estimator::Cluster {
                key: ClusterKey::Effect,
                adjust: false,
            },
            Estimator::Cluster {
                key: ClusterKey::Error,
                adjust: false,
            },
        ],
    }
}

fn group_assign_crosscorr(n: usize) -> ScenarioSpec {
    ScenarioSpec {
        name: Some("group-assign-crosscorr".into()),
        n,
        group_sizes: Some(Sizes::Uniform(5)),
        error0: ar1_unit(0.8),
        treatment: TreatmentSpec {
            level: AssignmentLevel::Group,
            dist: TreatmentDist::Bernoulli { p: 0.5 },
        },
        effect: EffectSpec::Constant { tau: 1.0 },
        controls: vec![ar1(0.5, 1.0)],
        gamma_true: vec![0.5, 1.0],
        alpha_dw: None,
        iv: None,
        methods: vec![
            Estimator::Classic,
            Estimator::Hc0,
            Estimator::Cluster {
                key: ClusterKey::Assignment,
                adjust: false,
            },
        ],
    }
}

fn iv_first_stage(n: usize) -> ScenarioSpec {
    ScenarioSpec {
        name: Some("iv-first-stage".into()),
        n,
        group_sizes: None,
        error0: ar1_unit(0.7),
        treatment: unit_bernoulli(0.5),
        effect: EffectSpec::Constant { tau: 1.0 },
        controls: vec![ar1(0.5, 1.0)],
        gamma_true: vec![0.5, 1.0],
        alpha_dw: None,
        iv: Some(IvSpec {
            rho: 1.0,
            eta: ar1(0.5, 1.0),
            endogeneity: 0.8,
        }),
        methods: vec![Estimator::Tsls, Estimator::Classic],
    }
}
