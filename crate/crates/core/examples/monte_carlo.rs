//! Monte-Carlo cost estimate against the exact moment-based cost, with and
//! without antithetic pairing.

use std::path::Path;
use std::time::Instant;

use mflq::auxiliary::solve_optimal;
use mflq::config::load_config;
use mflq::epsilon::regularize;
use mflq::moments::exact_cost;
use mflq::montecarlo::{ensemble_stats, estimate_cost, SimConfig};
use mflq::problem::validate_problem;
use mflq::riccati::RiccatiOptions;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = load_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/example62.cfg"))?;
    let prob = validate_problem(regularize(&cfg.problem, 0.1)?)?;
    let opt = solve_optimal(&prob, &RiccatiOptions::default())?;
    let exact = exact_cost(&prob, &opt.law, &cfg.initial)?;
    println!("exact cost {exact:.6}");

    let grid = prob.grid.with_steps(500)?;
    for antithetic in [false, true] {
        let sim = SimConfig::new(100_000, cfg.run.seed.unwrap_or(0), grid).antithetic(antithetic);
        let start = Instant::now();
        let est = estimate_cost(&prob, &opt.law, &cfg.initial, &sim)?;
        println!(
            "antithetic {antithetic:<5}: {:.6} +- {:.6} (z = {:.2}, {:.2} s)",
            est.mean,
            est.std_error,
            est.z_score(exact),
            start.elapsed().as_secs_f64()
        );
    }

    let stats = ensemble_stats(&prob, &opt.law, &cfg.initial, &SimConfig::new(20_000, 1, grid))?;
    let last = grid.n_steps;
    println!(
        "E[X(1)]: sampled {:.5} +- {:.5}, exact {:.5}",
        stats.mean[last][0],
        stats.mean_std_error(last, 0),
        stats.exact.mean[last][0]
    );
    Ok(())
}
