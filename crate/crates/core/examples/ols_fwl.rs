//! Fits OLS on a simulated draw and checks the partialled-out slope against
//! the full regression.
//!
//! ```text
//! cargo run --example ols_fwl
//! ```

use randse::dgp::{preset, simulate};
use randse::linmodel::{fit_ols, residualize_fwl};

fn main() -> randse::Result<()> {
    let spec = preset("strong-exog-ar1", Some(500))?;
    let draw = simulate(&spec, 11)?;
    let data = &draw.dataset;

    let fit = fit_ols(data)?;
    println!("n = {}, d_w = {}, beta_true = {}", data.n(), data.d_w(), spec.beta_true());
    println!("beta_hat  = {:.6}", fit.beta_hat());
    println!("gamma_hat = {:.4?}", fit.gamma_hat().as_slice());

    let db = residualize_fwl(data)?;
    let slope = db.dot(data.y()) / db.dot(&db);
    println!("partialled-out slope = {slope:.6}");
    println!("s2 = {:.5}, s2 (n - k) = {:.5}", fit.s2, fit.s2_dof());
    Ok(())
}
