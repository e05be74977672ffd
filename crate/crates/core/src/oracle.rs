//! Brute-force reference optimiser: minimises the exact cost over affine
//! laws whose `(K, K̄, k)` are piecewise constant on a few equal intervals,
//! by coordinate descent over nested, shrinking grids with a pattern move
//! after each sweep.

use serde::Serialize;

use crate::linalg::Mat;
use crate::moments::exact_cost;
use crate::problem::{AffineControlLaw, InitialLaw, Interp, MatrixFn, ProblemError, SampledFn, ValidatedProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceConfig {
    pub intervals: usize,
    /// half-width of the first search window around zero
    pub initial_radius: f64,
    /// candidates per coordinate and window (odd, so the centre is kept)
    pub points: usize,
    /// number of window refinements
    pub levels: usize,
    /// coordinate sweeps per level
    pub sweeps: usize,
    /// window shrink factor per level
    pub shrink: f64,
}

impl Default for BruteForceConfig {
    fn default() -> Self {
        Self { intervals: 4, initial_radius: 2.0, points: 9, levels: 10, sweeps: 2, shrink: 0.35 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BruteForceResult {
    pub cost: f64,
    /// per interval: `K` then `K̄` then `k`, each row-major
    pub params: Vec<f64>,
    pub evaluations: usize,
    #[serde(skip)]
    pub law: AffineControlLaw,
}

fn piecewise(problem: &ValidatedProblem, values: Vec<Mat>) -> Result<MatrixFn, ProblemError> {
    let grid = problem.grid;
    let len = values.len();
    let mut times: Vec<f64> = (0..len).map(|j| grid.t0 + (grid.t_end - grid.t0) * j as f64 / len as f64).collect();
    times.push(grid.t_end);
    let mut values = values;
    values.push(values[len - 1].clone());
    Ok(MatrixFn::Sampled(SampledFn::new(times, values, Interp::PiecewiseConstantLeft)?))
}

/// The law encoded by a parameter vector.
pub fn piecewise_law(problem: &ValidatedProblem, intervals: usize, params: &[f64]) -> Result<AffineControlLaw, ProblemError> {
    let (n, m) = (problem.n, problem.m);
    let per = 2 * m * n + m;
    let mut k = Vec::with_capacity(intervals);
    let mut kb = Vec::with_capacity(intervals);
    let mut off = Vec::with_capacity(intervals);
    for j in 0..intervals {
        let p = &params[j * per..(j + 1) * per];
        k.push(Mat::from_row_slice(m, n, &p[..m * n]));
        kb.push(Mat::from_row_slice(m, n, &p[m * n..2 * m * n]));
        off.push(Mat::from_row_slice(m, 1, &p[2 * m * n..]));
    }
    Ok(AffineControlLaw::new(piecewise(problem, k)?, piecewise(problem, kb)?, piecewise(problem, off)?))
}

pub fn brute_force_minimum(
    problem: &ValidatedProblem,
    law0: &InitialLaw,
    cfg: &BruteForceConfig,
) -> Result<BruteForceResult, ProblemError> {
    let dim = cfg.intervals * (2 * problem.m * problem.n + problem.m);
    let mut params = vec![0.0; dim];
    let mut evaluations = 0usize;
    let mut eval = |p: &[f64]| -> Result<f64, ProblemError> {
        evaluations += 1;
        let cost = exact_cost(problem, &piecewise_law(problem, cfg.intervals, p)?, law0)?;
        Ok(if cost.is_finite() { cost } else { f64::INFINITY })
    };
    let mut best = eval(&params)?;
    let mut radius = cfg.initial_radius;
    let half = (cfg.points.max(3) / 2) as f64;
    for _ in 0..cfg.levels {
        for _ in 0..cfg.sweeps {
            let start = params.clone();
            for i in 0..dim {
                let centre = params[i];
                let mut best_x = centre;
                for j in 0..cfg.points.max(3) {
                    let x = centre + radius * (j as f64 - half) / half;
                    if x == centre {
                        continue;
                    }
                    params[i] = x;
                    let c = eval(&params)?;
                    if c < best {
                        best = c;
                        best_x = x;
                    }
                }
                params[i] = best_x;
            }
            // pattern move along the sweep's net displacement, doubling while it pays
            let step: Vec<f64> = params.iter().zip(&start).map(|(a, b)| a - b).collect();
            let mut scale = 1.0;
            while step.iter().any(|d| *d != 0.0) {
                let trial: Vec<f64> = params.iter().zip(&step).map(|(p, d)| p + scale * d).collect();
                let c = eval(&trial)?;
                if c >= best {
                    break;
                }
                best = c;
                params = trial;
                scale *= 2.0;
            }
        }
        radius *= cfg.shrink;
    }
    let law = piecewise_law(problem, cfg.intervals, &params)?;
    Ok(BruteForceResult { cost: best, params, evaluations, law })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vect;
    use crate::problem::{validate_problem, ProblemSpec, TimeGrid};

    #[test]
    fn finds_the_constant_optimum() {
        let mut spec = ProblemSpec::zeros(1, 1, TimeGrid::new(0.0, 1.0, 40).unwrap());
        spec.b = MatrixFn::scalar(1.0);
        spec.r = MatrixFn::scalar(1.0);
        spec.g = Mat::from_element(1, 1, 1.0);
        let prob = validate_problem(spec).unwrap();
        let cfg = BruteForceConfig { intervals: 1, ..Default::default() };
        let res = brute_force_minimum(&prob, &InitialLaw::deterministic(Vect::from_element(1, 1.0)), &cfg).unwrap();
        assert!((res.cost - 0.5).abs() < 1e-5, "{}", res.cost);
    }
}
