//! Ratio of the dependent-error quadratic form to the white-noise one for
//! i.i.d. treatment and AR(1) errors, across sample sizes.
//!
//! ```text
//! cargo run --release --example lemma_ratio -- [rho]
//! ```

use randse::cli::{ar1_horizon, lemma_ratios};
use randse::diagnostics::LemmaMode;

fn main() -> randse::Result<()> {
    let rho: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.6);
    let horizon = ar1_horizon(rho);
    println!("rho {rho}, horizon {horizon}");
    for n in [50, 200, 1000, 5000, 20000] {
        let r = lemma_ratios(rho, n, 200, 1, horizon, LemmaMode::Raw)?;
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let sd = (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r.len() - 1) as f64).sqrt();
        println!("  n {n:>6}: mean {mean:.4}, sd {sd:.4}");
    }
    Ok(())
}
