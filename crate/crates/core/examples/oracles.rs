//! Asymptotic variance oracles for each preset and the reductions between
//! them.
//!
//! ```text
//! cargo run --example oracles
//! ```

use randse::dgp::{preset, PRESETS};
use randse::variance::{oracle_for, oracle_t1, oracle_t2_for, oracle_te};

fn main() -> randse::Result<()> {
    for info in PRESETS {
        let spec = preset(info.name, None)?;
        let o = oracle_for(&spec)?;
        println!("{:<24} {:?}  n*Var = {:.4}", info.name, o.theorem, o.asy_var);
    }

    // with unit-level effects the potential-outcome form and the
    // heteroskedastic form give the same number
    let spec = preset("hetero-iid-te", None)?;
    let te = oracle_te(&spec)?.asy_var;
    let t2 = oracle_t2_for(&spec)?.asy_var;
    let truth = spec.truth()?;
    let naive = oracle_t1(truth.sigma2_eps, truth.sigma2_d)?.asy_var;
    println!("\nhetero-iid-te: te {te:.4}, t2 {t2:.4}, homoskedastic formula {naive:.4}");
    Ok(())
}
