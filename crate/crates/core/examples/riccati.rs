//! Solves both Riccati equations for the bundled indefinite-weight example
//! and compares them with their closed forms.

use std::path::Path;

use mflq::config::load_config;
use mflq::riccati::{check_classic_condition, feedback_gains, solve_riccati, RiccatiOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = load_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/example61.cfg"))?;
    let prob = &cfg.problem;
    println!("classic condition holds: {}", check_classic_condition(prob)?.holds);

    let sol = solve_riccati(prob, &prob.grid, &RiccatiOptions::default())?;
    let gains = feedback_gains(prob, &sol)?;
    println!("delta0 = {:.6}, deltaSigma = {:.6}", sol.delta0, sol.delta_sigma);
    println!("{:>6} {:>14} {:>14} {:>14} {:>14} {:>14}", "s", "P", "2(s+1)^2", "Pi", "closed form", "Theta");
    let alpha = 0.05;
    for k in (0..=prob.grid.n_steps).step_by(prob.grid.n_steps / 8) {
        let s = prob.grid.node(k);
        let e = (2.0 * (1.0 - s)).exp();
        let pi_exact = alpha * e / (2.0 * alpha * (e - 1.0) - 1.0);
        println!(
            "{s:>6.3} {:>14.10} {:>14.10} {:>14.10} {:>14.10} {:>14.10}",
            sol.p.node(k)[(0, 0)],
            2.0 * (s + 1.0).powi(2),
            sol.pi.node(k)[(0, 0)],
            pi_exact,
            gains.theta.eval(s)?[(0, 0)],
        );
    }
    Ok(())
}
