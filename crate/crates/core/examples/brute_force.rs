//! Coordinate-descent search over piecewise-constant affine laws compared
//! with the Riccati value.

use std::path::Path;

use mflq::auxiliary::{solve_optimal, value_at};
use mflq::config::load_config;
use mflq::oracle::{brute_force_minimum, BruteForceConfig};
use mflq::riccati::RiccatiOptions;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = load_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/oracle1d.cfg"))?;
    let prob = &cfg.problem;
    let opt = solve_optimal(prob, &RiccatiOptions::default())?;
    let v = value_at(prob, &opt.riccati, &opt.aux, &cfg.initial)?;
    for intervals in [1, 2, 4] {
        let res = brute_force_minimum(prob, &cfg.initial, &BruteForceConfig { intervals, ..Default::default() })?;
        println!("{intervals} interval(s): min {:.8} after {} evaluations, gap {:.2e}", res.cost, res.evaluations, res.cost - v);
    }
    println!("Riccati value {v:.8}");
    Ok(())
}
