mod common;

use common::*;
use mflq::epsilon::regularize;
use mflq::linalg::asymmetry;
use mflq::problem::validate_problem;
use mflq::riccati::{feedback_gains, solve_lyapunov, solve_p, solve_pi, solve_riccati, RiccatiOptions};

#[test]
fn symmetry_drift_stays_below_tolerance() {
    let mut rng = Uniform::new(11);
    for _ in 0..20 {
        let prob = random_standard_spec(&mut rng, 400);
        let sol = solve_riccati(&prob, &prob.grid, &RiccatiOptions::default()).unwrap();
        assert!(sol.p.max_asymmetry() <= 1e-9);
        assert!(sol.pi.max_asymmetry() <= 1e-9);
        assert!(sol.p.values().iter().chain(sol.pi.values()).all(|m| asymmetry(m) <= 1e-9));
    }
}

#[test]
fn lyapunov_at_optimal_gain_reproduces_p() {
    let cfg = config("example61.cfg");
    let prob = &cfg.problem;
    let sol = solve_riccati(prob, &prob.grid, &RiccatiOptions::default()).unwrap();
    let gains = feedback_gains(prob, &sol).unwrap();
    let lyap = solve_lyapunov(prob, &gains.theta, &prob.grid).unwrap();
    let gap = lyap.values().iter().zip(sol.p.values()).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    assert!(gap <= 1e-5, "{gap:e}");
}

#[test]
fn standard_condition_specs_are_solvable_with_margin() {
    let mut rng = Uniform::new(12);
    for _ in 0..50 {
        let prob = random_standard_spec(&mut rng, 200);
        let delta = mflq::riccati::check_standard_condition(&prob).unwrap().delta;
        let p = solve_p(&prob, &prob.grid, &RiccatiOptions::default()).unwrap();
        let pi = solve_pi(&prob, &p, &prob.grid, &RiccatiOptions::default()).unwrap();
        assert!(p.delta0 >= delta / 2.0, "{} < {delta}/2", p.delta0);
        assert!(pi.delta_sigma >= delta / 2.0, "{} < {delta}/2", pi.delta_sigma);
        assert!(p.strongly_regular && pi.sigma_positive);
    }
}

#[test]
fn delta0_is_monotone_in_regularisation() {
    let cfg = config("example62.cfg");
    let opts = RiccatiOptions::default();
    let mut last: Option<Vec<f64>> = None;
    for eps in SCHEDULE {
        let prob = validate_problem(regularize(&cfg.problem, eps).unwrap()).unwrap();
        let p = solve_p(&prob, &prob.grid, &opts).unwrap();
        let margins: Vec<f64> = mflq::riccati::sigma_margins(&prob, &p.path).unwrap().into_iter().map(|m| m.0).collect();
        assert!((p.delta0 - (1.0 + eps)).abs() < 1e-10);
        if let Some(prev) = &last {
            assert!(prev.iter().zip(&margins).all(|(a, b)| a + 1e-12 >= *b));
        }
        last = Some(margins);
    }
}

#[test]
fn indefinite_weight_closed_forms_on_coarse_grid() {
    let cfg = config("example61.cfg");
    let grid = cfg.problem.grid.with_steps(200).unwrap();
    let sol = solve_riccati(&cfg.problem, &grid, &RiccatiOptions::default()).unwrap();
    assert!(max_node_error(&grid, sol.p.values(), p61) < 1e-8);
    assert!(max_node_error(&grid, sol.pi.values(), pi61) < 1e-8);
    assert!((sol.delta_sigma - 1.0).abs() < 1e-8);
}

#[test]
fn p_between_nodes_is_accurate() {
    let cfg = config("example61.cfg");
    let grid = cfg.problem.grid.with_steps(50).unwrap();
    let p = solve_p(&cfg.problem, &grid, &RiccatiOptions::default()).unwrap();
    for k in 0..50 {
        let s = grid.node(k) + 0.37 * grid.step();
        assert!((p.path.at(s)[(0, 0)] - p61(s)).abs() < 1e-7);
    }
}
