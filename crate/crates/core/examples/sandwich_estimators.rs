//! Every variance estimator on the same draw, with 95% intervals.
//!
//! ```text
//! cargo run --example sandwich_estimators -- [preset] [seed]
//! ```

use randse::dgp::{preset, simulate};
use randse::linmodel::fit_ols;
use randse::montecarlo::apply_estimator;
use randse::variance::{ci, Estimator};

fn main() -> randse::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "hetero-clustered-te".into());
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);

    let spec = preset(&name, None)?;
    let draw = simulate(&spec, seed)?;
    let fit = fit_ols(&draw.dataset)?;
    println!("{name}: beta_hat {:.4} (true {})", fit.beta_hat(), spec.beta_true());

    let methods = [
        "classic",
        "hc0",
        "hc1",
        "hac",
        "hac:10",
        "cluster:assign",
        "cluster:effect",
        "cluster:effect+adj",
    ];
    for label in methods {
        let est: Estimator = label.parse()?;
        match apply_estimator(est, &spec, &draw.dataset, &fit) {
            Ok((beta, v)) => {
                let (lo, hi) = ci(beta, &v, 0.95)?;
                println!("  {label:<20} se {:.5}  [{lo:.4}, {hi:.4}]", v.se);
            }
            Err(e) => println!("  {label:<20} n/a ({e})"),
        }
    }
    Ok(())
}
