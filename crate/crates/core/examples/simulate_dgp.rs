//! Draws one sample from a preset and writes it as CSV in the format the
//! `estimate` and `diagnose` subcommands read.
//!
//! ```text
//! cargo run --example simulate_dgp -- [preset] [seed] > draw.csv
//! ```

use std::io::Write;

use randse::dgp::{preset, simulate};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "group-assign-crosscorr".into());
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);

    let spec = preset(&name, Some(200))?;
    let draw = simulate(&spec, seed)?;
    let data = &draw.dataset;
    let truth = spec.truth()?;
    eprintln!("{name}: beta_true {}, sigma2_d {:.4}", spec.beta_true(), truth.sigma2_d);

    let mut out = csv::Writer::from_writer(std::io::stdout().lock());
    let mut header = vec!["y".to_string(), "d".to_string()];
    header.extend((1..=data.d_w()).map(|k| format!("w{k}")));
    if data.group_ids().is_some() {
        header.push("group".into());
    }
    if data.v().is_some() {
        header.push("v".into());
    }
    out.write_record(&header)?;
    for i in 0..data.n() {
        let mut row = vec![data.y()[i].to_string(), data.d()[i].to_string()];
        row.extend(data.w().row(i).iter().map(f64::to_string));
        if let Some(g) = data.group_ids() {
            row.push(g[i].to_string());
        }
        if let Some(v) = data.v() {
            row.push(v[i].to_string());
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    std::io::stdout().flush()?;
    Ok(())
}
