//! Exact mean and variance of the optimally controlled state, and the
//! cost assembled from them.

use std::path::Path;

use mflq::auxiliary::solve_optimal;
use mflq::config::load_config;
use mflq::moments::{control_norm, cost_of_path, propagate_moments};
use mflq::riccati::RiccatiOptions;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = load_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/example61.cfg"))?;
    let prob = &cfg.problem;
    let opt = solve_optimal(prob, &RiccatiOptions::default())?;
    let path = propagate_moments(prob, &opt.law, &cfg.initial)?;
    println!("{:>6} {:>14} {:>14} {:>14}", "s", "E[X]", "Var[X]", "E[u]");
    for k in (0..=prob.grid.n_steps).step_by(prob.grid.n_steps / 10) {
        println!(
            "{:>6.3} {:>14.8} {:>14.8} {:>14.8}",
            prob.grid.node(k),
            path.mean[k][0],
            path.cov[k][(0, 0)],
            path.mean_control[k][0]
        );
    }
    println!("J = {:.10}", cost_of_path(prob, &opt.law, &path)?);
    println!("E int |u|^2 = {:.10}", control_norm(prob, &opt.law, &cfg.initial)?);
    Ok(())
}
