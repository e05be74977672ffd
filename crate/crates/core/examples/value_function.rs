//! Optimal feedback law and value for a scalar problem with known answer 1/2.

use mflq::auxiliary::{solve_optimal, value_at};
use mflq::linalg::{Mat, Vect};
use mflq::moments::exact_cost;
use mflq::problem::{validate_problem, InitialLaw, MatrixFn, ProblemSpec, TimeGrid};
use mflq::riccati::RiccatiOptions;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // dX = u ds, J = E[X(1)^2 + ∫u^2]
    let mut spec = ProblemSpec::zeros(1, 1, TimeGrid::new(0.0, 1.0, 400)?);
    spec.b = MatrixFn::scalar(1.0);
    spec.r = MatrixFn::scalar(1.0);
    spec.g = Mat::from_element(1, 1, 1.0);
    let prob = validate_problem(spec)?;

    let opt = solve_optimal(&prob, &RiccatiOptions::default())?;
    let xi = InitialLaw::deterministic(Vect::from_element(1, 1.0));
    let v = value_at(&prob, &opt.riccati, &opt.aux, &xi)?;
    let j = exact_cost(&prob, &opt.law, &xi)?;
    println!("Pi(0) = {:.12}", opt.riccati.pi.first()[(0, 0)]);
    println!("value = {v:.12}, cost of the optimal law = {j:.12}");
    println!("Theta(0.5) = {:.12}", opt.gains.theta.eval(0.5)?[(0, 0)]);

    // shifting the mean along a constant direction raises the cost
    let worse = opt.law.with_offset_mean(opt.law.offset_mean().plus(MatrixFn::scalar(0.1)));
    println!("cost after a 0.1 shift = {:.12}", exact_cost(&prob, &worse, &xi)?);
    Ok(())
}
