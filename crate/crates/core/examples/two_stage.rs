//! First stage, 2SLS and its variance on the instrument preset, next to the
//! biased OLS fit.
//!
//! ```text
//! cargo run --example two_stage
//! ```

use randse::dgp::{preset, simulate};
use randse::linmodel::{fit_2sls, fit_first_stage, fit_ols};
use randse::variance::{ci, oracle_for, var_2sls};

fn main() -> randse::Result<()> {
    let spec = preset("iv-first-stage", None)?;
    let draw = simulate(&spec, 5)?;
    let data = &draw.dataset;

    let fs = fit_first_stage(data)?;
    println!("first stage rho_hat = {:.4}", fs.rho_hat);

    let ols = fit_ols(data)?;
    let iv = fit_2sls(data)?;
    let v = var_2sls(&iv);
    let (lo, hi) = ci(iv.beta_2sls, &v, 0.95)?;
    println!("beta_true = {}", spec.beta_true());
    println!("ols  beta = {:.4}", ols.beta_hat());
    println!("2sls beta = {:.4}, se {:.4}, 95% [{lo:.4}, {hi:.4}]", iv.beta_2sls, v.se);

    let oracle = oracle_for(&spec)?;
    println!("n * var_2sls = {:.3}, oracle = {:.3}", v.value * data.n() as f64, oracle.asy_var);
    Ok(())
}
