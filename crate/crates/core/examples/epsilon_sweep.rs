//! Regularisation sweep on a problem whose Riccati system is singular:
//! values, control norms, verdict and the extrapolated limit control.

use std::path::Path;

use mflq::config::load_config;
use mflq::epsilon::{diagnose_solvability, DiagnoseOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = load_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/example62.cfg"))?;
    let schedule = cfg.run.epsilon.clone().unwrap_or_else(|| vec![1.0, 0.3, 0.1, 0.03, 0.01]);
    let rep = diagnose_solvability(&cfg.problem, &cfg.initial, &schedule, &DiagnoseOptions::default())?;
    println!("{:>8} {:>14} {:>14}", "eps", "V_eps", "|u_eps|^2");
    for r in &rep.records {
        println!("{:>8} {:>14.10} {:>14.10}", r.epsilon, r.value.unwrap_or(f64::NAN), r.norm.unwrap_or(f64::NAN));
    }
    println!("verdict {}", rep.verdict.as_str());
    if let Some(law) = &rep.limit_law {
        for s in [0.0, 0.5, 1.0] {
            println!("limit E[u]({s}) = {:.6}", law.offset_mean().eval(s)?[(0, 0)]);
        }
    }
    Ok(())
}
