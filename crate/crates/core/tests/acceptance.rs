//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::Instant;

mod common;

use common::*;

use mflq::auxiliary::{dlq_cost_feedback, solve_optimal, value_at};
use mflq::epsilon::{diagnose_solvability, regularize, solve_epsilon_problem, DiagnoseOptions, Verdict};
use mflq::linalg::{Mat, Vect};
use mflq::moments::{exact_cost, propagate_moments};
use mflq::montecarlo::{constant_direction, estimate_cost, quadratic_expansion_check, CostEvaluator, SimConfig};
use mflq::oracle::{brute_force_minimum, BruteForceConfig};
use mflq::problem::{validate_problem, AffineControlLaw, InitialLaw};
use mflq::riccati::{
    check_classic_condition, check_standard_condition, feedback_gains, solve_p, solve_riccati, RiccatiError,
    RiccatiOptions,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_1() -> Outcome {
    let cfg = config("example61.cfg");
    let grid = cfg.problem.grid.with_steps(2000).unwrap();
    let start = Instant::now();
    let sol = solve_p(&cfg.problem, &grid, &RiccatiOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let err = max_node_error(&grid, sol.path.values(), p61);
    check(
        err <= 1e-6 && elapsed < 1.0 && sol.delta0 >= 1.0 - 1e-9,
        format!("max |P - 2(s+1)^2| = {err:.3e}, delta0 = {:.6}, {elapsed:.3} s", sol.delta0),
    )
}

fn criterion_2() -> Outcome {
    let cfg = config("example61.cfg");
    let sol = solve_riccati(&cfg.problem, &cfg.problem.grid, &RiccatiOptions::default()).map_err(|e| e.to_string())?;
    let err = max_node_error(&cfg.problem.grid, sol.pi.values(), pi61);
    let max_pi = sol.pi.values().iter().map(|m| m[(0, 0)]).fold(f64::NEG_INFINITY, f64::max);
    check(err <= 1e-6 && max_pi < 0.0, format!("max |Pi - closed form| = {err:.3e}, max Pi = {max_pi:.6}"))
}

fn criterion_3() -> Outcome {
    let cfg = config("example61.cfg");
    let prob = &cfg.problem;
    let sol = solve_riccati(prob, &prob.grid, &RiccatiOptions::default()).map_err(|e| e.to_string())?;
    let gains = feedback_gains(prob, &sol).map_err(|e| e.to_string())?;
    let (mut e_theta, mut e_mean_coef, mut e_theta_bar) = (0.0f64, 0.0f64, 0.0f64);
    for s in prob.grid.nodes() {
        let th = gains.theta.eval(s).unwrap()[(0, 0)];
        let thb = gains.theta_bar.eval(s).unwrap()[(0, 0)];
        e_theta = e_theta.max((th + 2.0 / (s + 1.0)).abs());
        // u = ΘX + (Θ̄ - Θ)E[X]
        e_mean_coef = e_mean_coef.max((thb - th - (2.0 / (s + 1.0) - 2.0 * pi61(s))).abs());
        e_theta_bar = e_theta_bar.max((thb + 2.0 * pi61(s)).abs());
    }
    check(
        e_theta <= 1e-6 && e_mean_coef <= 1e-6 && e_theta_bar <= 1e-6,
        format!(
            "max |Theta + 2/(s+1)| = {e_theta:.3e}, E[X] coefficient vs 2/(s+1) - 2Pi: {e_mean_coef:.3e}, \
             |ThetaBar + 2Pi| = {e_theta_bar:.3e}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let cfg = config("example62.cfg");
    let prob = &cfg.problem;
    let riccati = solve_riccati(prob, &prob.grid, &RiccatiOptions::default());
    let singular = matches!(riccati, Err(RiccatiError::SingularSigma { .. }));
    let classic = check_classic_condition(prob).unwrap();
    let standard = check_standard_condition(prob).unwrap();
    check(
        singular && !classic.holds && !standard.holds,
        format!(
            "riccati: {}, classic holds: {}, standard holds: {}",
            match &riccati {
                Ok(_) => "solved".to_string(),
                Err(e) => e.to_string(),
            },
            classic.holds,
            standard.holds
        ),
    )
}

fn criterion_5() -> Outcome {
    let cfg = config("example62.cfg");
    let prob = &cfg.problem;
    let opts = RiccatiOptions::default();
    let laws = [
        cfg.initial.clone(),
        InitialLaw::gaussian(Vect::from_element(1, 0.7), Mat::from_element(1, 1, 0.4)).unwrap(),
    ];
    let mut worst = [0.0f64; 4];
    for eps in SCHEDULE {
        for law0 in &laws {
            let sol = solve_epsilon_problem(prob, eps, law0, &opts).map_err(|e| e.to_string())?;
            let (mu, var) = (law0.mean[0], law0.cov[(0, 0)]);
            let r = &sol.optimal.riccati;
            worst[0] = worst[0].max(max_node_error(&prob.grid, r.p.values(), |_| 2.0));
            worst[1] = worst[1].max(max_node_error(&prob.grid, r.pi.values(), |s| pi62(eps, s)));
            let u = -3.0 * mu / (eps + 3.0);
            let path = propagate_moments(&sol.problem, sol.law(), law0).map_err(|e| e.to_string())?;
            for (k, ubar) in path.mean_control.iter().enumerate() {
                let k_gain = sol.law().gain().eval(prob.grid.node(k)).unwrap()[(0, 0)];
                worst[2] = worst[2].max((ubar[0] - u).abs()).max(k_gain.abs());
            }
            worst[3] = worst[3].max((sol.value - (2.0 * var + 3.0 * eps * mu * mu / (eps + 3.0))).abs());
        }
    }
    check(
        worst[0] <= 1e-10 && worst[1] <= 1e-6 && worst[2] <= 1e-6 && worst[3] <= 1e-6,
        format!(
            "max errors over eps in {SCHEDULE:?}: P {:.3e}, Pi {:.3e}, u* {:.3e}, V {:.3e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn criterion_6() -> Outcome {
    let cfg = config("example62.cfg");
    let prob = &cfg.problem;
    let rep = diagnose_solvability(prob, &cfg.initial, &SCHEDULE, &DiagnoseOptions::default()).map_err(|e| e.to_string())?;
    let monotone = rep.values_monotone(1e-9);
    let Some(limit) = rep.limit_law.as_ref() else {
        return Err(format!("verdict {}, no limit law", rep.verdict.as_str()));
    };
    let mu = cfg.initial.mean[0];
    let target = -mu / (prob.grid.t_end - prob.grid.t0);
    let mut err = 0.0f64;
    for s in prob.grid.nodes() {
        // deterministic ξ: the limit control is its mean part
        let u = limit.offset_mean().eval(s).unwrap()[(0, 0)];
        let k = limit.gain().eval(s).unwrap()[(0, 0)];
        err = err.max((u - target).abs()).max(k.abs());
    }
    check(
        rep.verdict == Verdict::Solvable && err <= 1e-3 && monotone,
        format!("verdict {}, max |u_limit + 1| = {err:.3e}, V_eps monotone: {monotone}", rep.verdict.as_str()),
    )
}

fn criterion_7() -> Outcome {
    let cfg = config("oracle1d.cfg");
    let prob = &cfg.problem;
    let opt = solve_optimal(prob, &RiccatiOptions::default()).map_err(|e| e.to_string())?;
    let value = value_at(prob, &opt.riccati, &opt.aux, &cfg.initial).map_err(|e| e.to_string())?;
    let riccati_cost = exact_cost(prob, &opt.law, &cfg.initial).map_err(|e| e.to_string())?;
    let brute = brute_force_minimum(prob, &cfg.initial, &BruteForceConfig::default()).map_err(|e| e.to_string())?;
    check(
        (brute.cost - value).abs() <= 1e-3 && (value - 0.5).abs() <= 1e-6 && riccati_cost <= brute.cost + 1e-6,
        format!(
            "brute force min {:.9} ({} evaluations), value_at {:.9}, Riccati law cost {:.9}",
            brute.cost, brute.evaluations, value, riccati_cost
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = Uniform::new(8);
    let mut problems = vec![config("example61.cfg").problem];
    for _ in 0..5 {
        problems.push(random_standard_spec(&mut rng, 1000));
    }
    let mut worst = 0.0f64;
    let mut count = 0;
    for prob in &problems {
        let homogeneous = validate_problem(prob.homogeneous()).unwrap();
        let ric = solve_riccati(&homogeneous, &homogeneous.grid, &RiccatiOptions::default()).map_err(|e| e.to_string())?;
        let gains = feedback_gains(&homogeneous, &ric).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let v = random_control(&mut rng, prob.m);
            // u = ΘX + v = Θ(X - E[X]) + ΘE[X] + v
            let law = AffineControlLaw::new(gains.theta.clone(), gains.theta.clone(), v.clone());
            let j0 = exact_cost(&homogeneous, &law, &InitialLaw::zero(prob.n)).map_err(|e| e.to_string())?;
            let jbar = dlq_cost_feedback(&homogeneous, &ric.p, &gains.theta, &v, &Vect::zeros(prob.n))
                .map_err(|e| e.to_string())?;
            worst = worst.max(relative_gap(j0, jbar));
            count += 1;
        }
    }
    check(worst <= 1e-6, format!("{count} controls on {} problems, max relative gap {worst:.3e}", problems.len()))
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    let cases = {
        let c61 = config("example61.cfg");
        let c62 = config("example62.cfg");
        let opt61 = solve_optimal(&c61.problem, &RiccatiOptions::default()).map_err(|e| e.to_string())?;
        let eps = 0.1;
        let reg = validate_problem(regularize(&c62.problem, eps).unwrap()).unwrap();
        let opt62 = solve_optimal(&reg, &RiccatiOptions::default()).map_err(|e| e.to_string())?;
        vec![
            ("example61", c61.problem.clone(), opt61.law, c61.initial.clone(), c61.run.seed.unwrap()),
            ("example62, eps = 0.1", reg, opt62.law, c62.initial.clone(), c62.run.seed.unwrap()),
        ]
    };
    for (name, prob, law, law0, seed) in cases {
        let exact = exact_cost(&prob, &law, &law0).map_err(|e| e.to_string())?;
        let sim = SimConfig::new(100_000, seed, prob.grid.with_steps(500).unwrap());
        let est = estimate_cost(&prob, &law, &law0, &sim).map_err(|e| e.to_string())?;
        let z = est.z_score(exact);
        ok &= z <= 3.0;
        lines.push(format!("{name}: estimate {:.5} +- {:.5}, exact {exact:.5}, z = {z:.2}", est.mean, est.std_error));
    }
    let elapsed = start.elapsed().as_secs_f64();
    ok &= elapsed < 30.0;
    check(ok, format!("{}; {elapsed:.1} s", lines.join("; ")))
}

fn criterion_10() -> Outcome {
    let cfg = config("example61.cfg");
    let prob = &cfg.problem;
    let opt = solve_optimal(prob, &RiccatiOptions::default()).map_err(|e| e.to_string())?;
    let fit = quadratic_expansion_check(
        prob,
        &opt.law,
        &constant_direction(1, 1, 1.0),
        &[-0.2, -0.1, 0.0, 0.1, 0.2],
        &cfg.initial,
        CostEvaluator::Exact,
    )
    .map_err(|e| e.to_string())?;
    check(
        fit.linear.abs() <= 1e-6 && fit.residual <= 1e-9,
        format!(
            "linear {:.3e}, relative residual {:.3e}, quadratic {:.9} vs direct {:.9}",
            fit.linear, fit.residual, fit.quadratic, fit.expected_quadratic
        ),
    )
}

fn criterion_11() -> Outcome {
    let cfg = config("example61.cfg");
    let prob = &cfg.problem;
    let steps = [10usize, 20, 40, 80];
    let mut p_err = Vec::new();
    let mut pi_err = Vec::new();
    for n in steps {
        let grid = prob.grid.with_steps(n).unwrap();
        let sol = solve_riccati(prob, &grid, &RiccatiOptions::default()).map_err(|e| e.to_string())?;
        p_err.push(max_node_error(&grid, sol.p.values(), p61));
        pi_err.push(max_node_error(&grid, sol.pi.values(), pi61));
    }
    let ratios = |e: &[f64]| e.windows(2).map(|w| w[0] / w[1]).collect::<Vec<_>>();
    let (rp, rpi) = (ratios(&p_err), ratios(&pi_err));
    check(
        rp.iter().chain(&rpi).all(|r| *r >= 8.0),
        format!("steps {steps:?}: P error ratios {rp:.2?}, Pi error ratios {rpi:.2?}"),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("example61 Riccati P matches 2(s+1)^2", criterion_1),
        ("example61 Riccati Pi matches the closed form and stays negative", criterion_2),
        ("example61 feedback gains", criterion_3),
        ("example62 base problem is singular and fails both sufficient conditions", criterion_4),
        ("example62 regularised closed forms", criterion_5),
        ("example62 sweep verdict and limit control", criterion_6),
        ("brute-force oracle equivalence", criterion_7),
        ("reduction identity for the mean problem", criterion_8),
        ("Monte-Carlo consistency with exact costs", criterion_9),
        ("quadratic expansion of the cost", criterion_10),
        ("RK4 fourth-order convergence", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
