//! The ε-regularisation scheme: add `ε E∫|u|²` to the cost, solve each
//! regularised problem through the Riccati route, and read convexity,
//! finiteness and solvability off the resulting sequence.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::auxiliary::{solve_optimal, OptimalSolution};
use crate::linalg::{Mat, Vect};
use crate::moments::propagate_moments;
use crate::problem::{
    validate_problem, AffineControlLaw, InitialLaw, Interp, MatrixFn, ProblemError, ProblemSpec, SampledFn,
    ValidatedProblem,
};
use crate::riccati::{RiccatiError, RiccatiOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpsilonError {
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("schedule must be non-empty, positive and strictly decreasing")]
    InvalidSchedule,
    #[error("regularised Riccati system unsolvable at epsilon = {epsilon}: {source}")]
    RiccatiFailure { epsilon: f64, source: RiccatiError },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// The problem with `R` replaced by `R + εI`.
pub fn regularize(spec: &ProblemSpec, epsilon: f64) -> Result<ProblemSpec, EpsilonError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(EpsilonError::InvalidEpsilon(epsilon));
    }
    Ok(ProblemSpec { r: spec.r.shifted(epsilon), ..spec.clone() })
}

#[derive(Debug, Clone)]
pub struct EpsilonSolution {
    pub epsilon: f64,
    pub problem: ValidatedProblem,
    pub optimal: OptimalSolution,
    /// `V_ε(t0, ξ)`
    pub value: f64,
    /// `E ∫ |u*_ε|² ds`
    pub norm: f64,
    /// `E[u*_ε]` at each node
    pub mean_control: Vec<Vect>,
}

impl EpsilonSolution {
    pub fn law(&self) -> &AffineControlLaw {
        &self.optimal.law
    }
}

/// Solves the ε-regularised problem; `ε = 0` solves the problem itself.
pub fn solve_epsilon_problem(
    problem: &ValidatedProblem,
    epsilon: f64,
    law0: &InitialLaw,
    opts: &RiccatiOptions,
) -> Result<EpsilonSolution, EpsilonError> {
    let regular = if epsilon == 0.0 {
        problem.clone()
    } else {
        validate_problem(regularize(problem, epsilon)?)?
    };
    let failure = |source| EpsilonError::RiccatiFailure { epsilon, source };
    let optimal = solve_optimal(&regular, opts).map_err(failure)?;
    let value = optimal.value(&regular, law0).map_err(failure)?;
    let path = propagate_moments(&regular, &optimal.law, law0)?;
    let norm = crate::linalg::simpson(&path.control_energy, path.grid.step());
    Ok(EpsilonSolution { epsilon, problem: regular, optimal, value, norm, mean_control: path.mean_control })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    UniformlyConvex,
    Solvable,
    FiniteUnresolved,
    NotFiniteEvidence,
    NotConvexEvidence,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::UniformlyConvex => "UNIFORMLY_CONVEX",
            Verdict::Solvable => "SOLVABLE",
            Verdict::FiniteUnresolved => "FINITE_UNRESOLVED",
            Verdict::NotFiniteEvidence => "NOT_FINITE_EVIDENCE",
            Verdict::NotConvexEvidence => "NOT_CONVEX_EVIDENCE",
        }
    }

    /// Verdicts that witness a failure of the problem.
    pub fn is_failure(&self) -> bool {
        matches!(self, Verdict::NotFiniteEvidence | Verdict::NotConvexEvidence)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnoseOptions {
    /// relative norm growth between the two smallest ε below which the
    /// sequence counts as bounded
    pub norm_growth_tol: f64,
    /// values below `-value_floor` count as evidence of `V = -∞`
    pub value_floor: f64,
    pub riccati: RiccatiOptions,
}

impl Default for DiagnoseOptions {
    fn default() -> Self {
        Self { norm_growth_tol: 0.05, value_floor: 1e9, riccati: RiccatiOptions::default() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonRecord {
    pub epsilon: f64,
    pub riccati_ok: bool,
    pub value: Option<f64>,
    pub norm: Option<f64>,
    pub delta0: Option<f64>,
    pub delta_sigma: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub solution: Option<EpsilonSolution>,
}

impl EpsilonRecord {
    fn from_result(epsilon: f64, r: Result<EpsilonSolution, EpsilonError>) -> Self {
        match r {
            Ok(sol) => EpsilonRecord {
                epsilon,
                riccati_ok: true,
                value: Some(sol.value),
                norm: Some(sol.norm),
                delta0: Some(sol.optimal.riccati.delta0),
                delta_sigma: Some(sol.optimal.riccati.delta_sigma),
                error: None,
                solution: Some(sol),
            },
            Err(e) => EpsilonRecord {
                epsilon,
                riccati_ok: false,
                value: None,
                norm: None,
                delta0: None,
                delta_sigma: None,
                error: Some(e.to_string()),
                solution: None,
            },
        }
    }

    pub fn law(&self) -> Option<&AffineControlLaw> {
        self.solution.as_ref().map(|s| s.law())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonReport {
    pub schedule: Vec<f64>,
    pub records: Vec<EpsilonRecord>,
    pub verdict: Verdict,
    /// `V(t0, ξ)` of the unregularised problem when it is uniformly convex
    pub base_value: Option<f64>,
    /// relative norm growth between the two smallest ε
    pub norm_growth: Option<f64>,
    /// Extrapolated limit `u = Θ₀(X - E[X]) + ū₀(s)`, formed node-wise
    /// from the two smallest ε.
    #[serde(skip)]
    pub limit_law: Option<AffineControlLaw>,
}

impl EpsilonReport {
    /// True when `V_ε` does not increase as ε decreases, within `slack`.
    pub fn values_monotone(&self, slack: f64) -> bool {
        let vals: Vec<f64> = self.records.iter().filter_map(|r| r.value).collect();
        vals.windows(2).all(|w| w[1] <= w[0] + slack)
    }

    /// True when `E∫|u*_ε|²` does not decrease as ε decreases, within `slack`.
    pub fn norms_monotone(&self, slack: f64) -> bool {
        let vals: Vec<f64> = self.records.iter().filter_map(|r| r.norm).collect();
        vals.windows(2).all(|w| w[1] >= w[0] - slack)
    }
}

/// `y(0)` from the line through `(e1, y1)` and `(e2, y2)`.
fn extrapolate(e1: f64, y1: &Mat, e2: f64, y2: &Mat) -> Mat {
    y2 - (y1 - y2) * (e2 / (e1 - e2))
}

fn limit_law(problem: &ValidatedProblem, a: &EpsilonSolution, b: &EpsilonSolution) -> Result<AffineControlLaw, ProblemError> {
    let grid = problem.grid;
    let fine = grid.refined();
    let (ga, gb) = (&a.optimal.gains.theta, &b.optimal.gains.theta);
    let gains = fine
        .nodes()
        .into_iter()
        .map(|t| Ok(extrapolate(a.epsilon, &ga.eval(t)?, b.epsilon, &gb.eval(t)?)))
        .collect::<Result<Vec<_>, ProblemError>>()?;
    let col = |v: &Vect| Mat::from_column_slice(v.len(), 1, v.as_slice());
    let offsets = a
        .mean_control
        .iter()
        .zip(&b.mean_control)
        .map(|(ua, ub)| extrapolate(a.epsilon, &col(ua), b.epsilon, &col(ub)))
        .collect();
    Ok(AffineControlLaw::new(
        MatrixFn::Sampled(SampledFn::on_grid(&fine, gains, Interp::PiecewiseLinear)?),
        MatrixFn::zeros(problem.m, problem.n),
        MatrixFn::Sampled(SampledFn::on_grid(&grid, offsets, Interp::PiecewiseLinear)?),
    ))
}

/// Runs the ε-sweep (entries in parallel, assembled in schedule order) and
/// classifies the problem.
pub fn diagnose_solvability(
    problem: &ValidatedProblem,
    law0: &InitialLaw,
    schedule: &[f64],
    opts: &DiagnoseOptions,
) -> Result<EpsilonReport, EpsilonError> {
    if schedule.is_empty()
        || schedule.iter().any(|e| !(*e > 0.0 && e.is_finite()))
        || schedule.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(EpsilonError::InvalidSchedule);
    }
    law0.validate(problem.n)?;
    let base = solve_epsilon_problem(problem, 0.0, law0, &opts.riccati).ok();
    let records: Vec<EpsilonRecord> = schedule
        .par_iter()
        .map(|&e| EpsilonRecord::from_result(e, solve_epsilon_problem(problem, e, law0, &opts.riccati)))
        .collect();

    let norm_growth = match records.as_slice() {
        [.., a, b] => match (a.norm, b.norm) {
            (Some(na), Some(nb)) => Some((nb - na) / na.abs().max(f64::MIN_POSITIVE)),
            _ => None,
        },
        _ => None,
    };
    let mut limit = None;
    let verdict = if base.is_some() {
        Verdict::UniformlyConvex
    } else if records.iter().any(|r| !r.riccati_ok) {
        Verdict::NotConvexEvidence
    } else if records.iter().any(|r| r.value.is_some_and(|v| v < -opts.value_floor)) {
        Verdict::NotFiniteEvidence
    } else if norm_growth.is_some_and(|g| g < opts.norm_growth_tol) {
        let n = records.len();
        let (a, b) = (records[n - 2].solution.as_ref().unwrap(), records[n - 1].solution.as_ref().unwrap());
        limit = Some(limit_law(problem, a, b)?);
        Verdict::Solvable
    } else {
        Verdict::FiniteUnresolved
    };
    Ok(EpsilonReport {
        schedule: schedule.to_vec(),
        records,
        verdict,
        base_value: base.as_ref().map(|b| b.value),
        norm_growth,
        limit_law: limit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::TimeGrid;

    fn unit_r(n_steps: usize) -> ValidatedProblem {
        let mut spec = ProblemSpec::zeros(1, 1, TimeGrid::new(0.0, 1.0, n_steps).unwrap());
        spec.r = MatrixFn::scalar(1.0);
        validate_problem(spec).unwrap()
    }

    #[test]
    fn regularisation_is_additive_and_rejects_zero() {
        let prob = unit_r(10);
        let twice = regularize(&regularize(&prob, 0.25).unwrap(), 0.5).unwrap();
        let once = regularize(&prob, 0.75).unwrap();
        for t in prob.grid.nodes() {
            assert_eq!(twice.r.eval(t).unwrap(), once.r.eval(t).unwrap());
        }
        assert!(regularize(&prob, 0.0).is_err());
        assert!(regularize(&prob, -1.0).is_err());
    }

    #[test]
    fn unit_r_is_uniformly_convex_with_zero_value() {
        let prob = unit_r(50);
        let rep = diagnose_solvability(&prob, &InitialLaw::zero(1), &[1.0, 0.1], &DiagnoseOptions::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::UniformlyConvex);
        assert_eq!(rep.base_value, Some(0.0));
    }

    #[test]
    fn schedule_must_decrease() {
        let prob = unit_r(10);
        let opts = DiagnoseOptions::default();
        for bad in [&[][..], &[0.1, 0.2], &[0.1, 0.1], &[0.1, 0.0]] {
            assert_eq!(
                diagnose_solvability(&prob, &InitialLaw::zero(1), bad, &opts).unwrap_err(),
                EpsilonError::InvalidSchedule
            );
        }
    }

    #[test]
    fn extrapolation_is_exact_on_lines() {
        let y = |e: f64| Mat::from_element(1, 1, 2.0 - 3.0 * e);
        assert!((extrapolate(0.3, &y(0.3), 0.1, &y(0.1))[(0, 0)] - 2.0).abs() < 1e-15);
    }
}
