//! Sample evidence for the design assumptions. Everything here reports; only
//! malformed inputs produce errors.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linmodel::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flag {
    /// Smallest eigenvalue of `n⁻¹WᵀW` below `1e-10 · trace`.
    Multicollinearity,
    NoConstant,
    /// Sample variance of `d` below `1e-12`.
    DegenerateTreatment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub central4: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MartingaleStat {
    pub lag: usize,
    pub statistic: f64,
    pub se: f64,
}

impl MartingaleStat {
    /// `|statistic| > k · se`.
    pub fn exceeds(&self, k: f64) -> bool {
        self.statistic.abs() > k * self.se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub n: usize,
    pub lambda_min_w: f64,
    pub trace_w: f64,
    pub has_constant: bool,
    pub d_moments: Moments,
    pub martingale_stats: Vec<MartingaleStat>,
    pub flags: Vec<Flag>,
    pub notes: String,
}

pub fn moments(x: &[f64]) -> Moments {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in x {
        let c = (v - mean) * (v - mean);
        m2 += c;
        m4 += c * c;
    }
    Moments {
        mean,
        variance: m2 / n,
        central4: m4 / n,
    }
}

/// Conditioning of the controls and spread of the treatment. Martingale
/// statistics are left empty; see [`check_assumptions_with_residuals`].
pub fn check_assumptions(data: &Dataset) -> DiagnosticsReport {
    let n = data.n();
    let gram = data.w().transpose() * data.w() / n as f64;
    let trace_w = gram.trace();
    let lambda_min_w = min_eigenvalue(gram).max(0.0);
    let d_moments = moments(data.d().as_slice());
    let has_constant = data.has_constant();

    let mut flags = Vec::new();
    let mut notes = Vec::new();
    if lambda_min_w < 1e-10 * trace_w {
        flags.push(Flag::Multicollinearity);
        notes.push(format!("controls are collinear: lambda_min {lambda_min_w:.3e}, trace {trace_w:.3e}"));
    }
    if !has_constant {
        flags.push(Flag::NoConstant);
        notes.push("no constant column among the controls".to_string());
    }
    if d_moments.variance < 1e-12 {
        flags.push(Flag::DegenerateTreatment);
        notes.push(format!("treatment has sample variance {:.3e}", d_moments.variance));
    }
    DiagnosticsReport {
        n,
        lambda_min_w,
        trace_w,
        has_constant,
        d_moments,
        martingale_stats: Vec::new(),
        flags,
        notes: notes.join("; "),
    }
}

/// [`check_assumptions`] plus [`martingale_check`] on the given residuals.
pub fn check_assumptions_with_residuals(data: &Dataset, residuals: &[f64], max_lag: usize) -> Result<DiagnosticsReport> {
    let mut report = check_assumptions(data);
    report.martingale_stats = martingale_check(data.d().as_slice(), residuals, max_lag)?;
    Ok(report)
}

fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    m.symmetric_eigen().eigenvalues.min()
}

/// Lag-`h` products of the score `d*_i ê_i`, `h = 1..=max_lag`.
///
/// `statistic_h = n⁻¹ Σ_i s_i s_{i+h}` with `s_i = (d_i − d̄) ê_i`; `se` is the
/// sample standard deviation of the `n − h` products over `√(n − h)`.
pub fn martingale_check(d: &[f64], residuals: &[f64], max_lag: usize) -> Result<Vec<MartingaleStat>> {
    let n = d.len();
    if residuals.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "d has {n} entries, residuals {}",
            residuals.len()
        )));
    }
    if 2 * max_lag >= n {
        return Err(Error::InvalidData(format!("max_lag {max_lag} must be below n/2 = {}", n / 2)));
    }
    let mean = d.iter().sum::<f64>() / n as f64;
    let s: Vec<f64> = d.iter().zip(residuals).map(|(d, e)| (d - mean) * e).collect();
    Ok((1..=max_lag)
        .map(|h| {
            let products: Vec<f64> = s.iter().zip(&s[h..]).map(|(a, b)| a * b).collect();
            let m = products.len() as f64;
            let sum: f64 = products.iter().sum();
            let pmean = sum / m;
            let var = products.iter().map(|p| (p - pmean) * (p - pmean)).sum::<f64>() / (m - 1.0).max(1.0);
            MartingaleStat {
                lag: h,
                statistic: sum / n as f64,
                se: var.sqrt() / m.sqrt(),
            }
        })
        .collect())
}

/// How [`lemma_ratio_with`] treats `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LemmaMode {
    /// Use `d` as given; the ratio's limit assumes mean-zero `d`.
    #[default]
    Raw,
    Demeaned,
}

/// `DᵀΩD / (Γ(0) DᵀD)` with `Ω_{ij} = Γ(|i − j|)`, zero beyond `gamma.len() − 1`.
pub fn lemma_ratio(d: &[f64], gamma: &[f64]) -> Result<f64> {
    lemma_ratio_with(d, gamma, LemmaMode::Raw)
}

pub fn lemma_ratio_with(d: &[f64], gamma: &[f64], mode: LemmaMode) -> Result<f64> {
    let g0 = gamma.first().copied().unwrap_or(f64::NAN);
    if !(g0 > 0.0) {
        return Err(Error::InvalidGamma(g0));
    }
    let owned;
    let d = match mode {
        LemmaMode::Raw => d,
        LemmaMode::Demeaned => {
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            owned = d.iter().map(|x| x - mean).collect::<Vec<_>>();
            &owned
        }
    };
    let dd: f64 = d.iter().map(|x| x * x).sum();
    if !(dd > 0.0) {
        return Err(Error::InvalidData("d is identically zero".into()));
    }
    let mut quad = g0 * dd;
    for (h, g) in gamma.iter().enumerate().skip(1).take(d.len().saturating_sub(1)) {
        if *g != 0.0 {
            let cross: f64 = d.iter().zip(&d[h..]).map(|(a, b)| a * b).sum();
            quad += 2.0 * g * cross;
        }
    }
    Ok(quad / (g0 * dd))
}

/// `M1 = n^{-1/2} Σ (A_i − μ_A)ᵀ e_i` and `M2 = n^{-1/2} Σ μ_Aᵀ e_i`.
pub fn score_decomposition(a: &[Vec<f64>], e: &[Vec<f64>], mu_a: &[f64]) -> Result<(f64, f64)> {
    if a.len() != e.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(format!("{} A rows, {} e rows", a.len(), e.len())));
    }
    let l = mu_a.len();
    let (mut m1, mut m2) = (0.0, 0.0);
    for (ai, ei) in a.iter().zip(e) {
        if ai.len() != l || ei.len() != l {
            return Err(Error::DimensionMismatch(format!("expected vectors of length {l}")));
        }
        for k in 0..l {
            m1 += (ai[k] - mu_a[k]) * ei[k];
            m2 += mu_a[k] * ei[k];
        }
    }
    let scale = (a.len() as f64).sqrt();
    Ok((m1 / scale, m2 / scale))
}
