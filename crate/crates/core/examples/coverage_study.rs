//! Runs every built-in preset and prints coverage per estimator next to the
//! expected bands.
//!
//! ```text
//! cargo run --release --example coverage_study -- [R] [seed]
//! ```

use randse::dgp::{preset, PRESETS};
use randse::montecarlo::run_scenario;

fn main() -> randse::Result<()> {
    let mut args = std::env::args().skip(1);
    let reps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);

    for info in PRESETS {
        let spec = preset(info.name, None)?;
        let res = run_scenario(&spec, reps, seed, 0)?;
        println!(
            "{} (n={}, R={}): oracle {:.4}, n·Var(β̂) {:.4} ± {:.4}",
            info.name,
            res.n,
            res.used,
            res.oracle_asy_var.unwrap_or(f64::NAN),
            res.empirical_asy_var,
            res.empirical_asy_var_mc_se
        );
        for m in &res.methods {
            let band = info
                .bands
                .iter()
                .find(|b| b.method == m.method)
                .map(|b| format!("[{:.3}, {:.3}]", b.lo, b.hi))
                .unwrap_or_default();
            println!(
                "  {:<20} coverage {:.4} ± {:.4}  var ratio {:.3}  {band}",
                m.method.to_string(),
                m.coverage,
                m.mc_se,
                m.variance_ratio.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
