//! Lagged cross-moment statistics between treatment and residuals, on a
//! design where they should be quiet and on one where treatment is serially
//! correlated.
//!
//! ```text
//! cargo run --example martingale_diagnostic
//! ```

use nalgebra::{DMatrix, DVector};
use randse::dgp::{gen_errors, preset, simulate, ErrorProcessSpec};
use randse::diagnostics::{check_assumptions_with_residuals, MartingaleStat};
use randse::linmodel::{fit_ols, Dataset};
use randse::rng;

fn show(label: &str, stats: &[MartingaleStat]) {
    println!("{label}");
    for s in stats {
        let flag = if s.exceeds(3.0) { "  <-" } else { "" };
        println!("  lag {:>2}: {:>8.3} (se {:.3}){flag}", s.lag, s.statistic, s.se);
    }
}

fn main() -> randse::Result<()> {
    let spec = preset("strong-exog-ar1", None)?;
    let draw = simulate(&spec, 9)?;
    let fit = fit_ols(&draw.dataset)?;
    let report = check_assumptions_with_residuals(&draw.dataset, fit.residuals.as_slice(), 5)?;
    println!("lambda_min(W'W/n) = {:.4}, flags {:?}", report.lambda_min_w, report.flags);
    show("randomized treatment, AR(1) errors", &report.martingale_stats);

    let n = 2000;
    let d = gen_errors(&ErrorProcessSpec::Ar1 { rho: 0.9, sigma: 1.0 }, n, &mut rng::stream(9, 1))?;
    let e = gen_errors(&ErrorProcessSpec::Ar1 { rho: 0.7, sigma: 1.0 }, n, &mut rng::stream(9, 2))?;
    let y: Vec<f64> = d.iter().zip(&e).map(|(d, e)| 1.0 + d + e).collect();
    let data = Dataset::new(DVector::from_vec(y), DVector::from_vec(d), DMatrix::from_element(n, 1, 1.0))?;
    let fit = fit_ols(&data)?;
    let report = check_assumptions_with_residuals(&data, fit.residuals.as_slice(), 5)?;
    show("AR(1) treatment, AR(1) errors", &report.martingale_stats);
    Ok(())
}
