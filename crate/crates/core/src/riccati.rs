//! Backward integration of the two coupled Riccati equations, the Lyapunov
//! equation for a fixed gain, feedback-gain assembly and the sufficient
//! conditions for uniform convexity.
//!
//! The centred-dynamics equation for `P` is
//!
//! ```text
//! P' + PA + AᵀP + CᵀPC + Q - (PB + CᵀPD + Sᵀ) Σ₀⁻¹ (BᵀP + DᵀPC + S) = 0,   P(T) = G,
//! Σ₀ = R + DᵀPD,
//! ```
//!
//! and, with `Â = A + Ā` etc., the mean-dynamics equation for `Π` is
//!
//! ```text
//! Π' + ΠÂ + ÂᵀΠ + Υ - (ΠB̂ + Γᵀ) Σ⁻¹ (B̂ᵀΠ + Γ) = 0,   Π(T) = G + Ḡ,
//! Υ = Q̂ + ĈᵀPĈ,  Γ = D̂ᵀPĈ + Ŝ,  Σ = R̂ + D̂ᵀPD̂.
//! ```
//!
//! Both are integrated with fixed-step RK4 from `T` down to `t0`, with the
//! iterate symmetrised after every step. Between nodes `P` is reconstructed
//! by cubic Hermite interpolation from node values and node derivatives.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{asymmetry, hermite, is_finite, min_eigenvalue, rk4_step, symmetrize, Mat};
use crate::problem::{
    eval_matrix, stage_index, Coefficients, Interp, MatrixFn, ProblemError, SampledFn, TimeGrid, ValidatedProblem,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiccatiError {
    #[error("R + DᵀPD is singular or indefinite at s = {time} (λ_min = {min_eig:e})")]
    SingularSigma0 { time: f64, min_eig: f64 },
    #[error("R + R̄ + (D+D̄)ᵀP(D+D̄) is singular or indefinite at s = {time} (λ_min = {min_eig:e})")]
    SingularSigma { time: f64, min_eig: f64 },
    #[error("solution escapes (norm {norm:e}) at s = {time}")]
    BlowUp { time: f64, norm: f64 },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiOptions {
    /// Singularity floor for Σ₀ and Σ, relative to `max(1, ‖Σ‖)`.
    pub inv_tol: f64,
    pub reg_threshold: f64,
    pub blowup_cap: f64,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self { inv_tol: 1e-8, reg_threshold: 1e-8, blowup_cap: 1e12 }
    }
}

/// Matrix samples at the nodes of a grid together with their time
/// derivatives, interpolated by cubic Hermite polynomials.
#[derive(Debug, Clone)]
pub struct MatrixPath {
    grid: TimeGrid,
    values: Vec<Mat>,
    derivs: Vec<Mat>,
}

impl MatrixPath {
    pub fn new(grid: TimeGrid, values: Vec<Mat>, derivs: Vec<Mat>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        debug_assert_eq!(derivs.len(), grid.len());
        Self { grid, values, derivs }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    pub fn derivs(&self) -> &[Mat] {
        &self.derivs
    }

    pub fn node(&self, k: usize) -> &Mat {
        &self.values[k]
    }

    pub fn first(&self) -> &Mat {
        &self.values[0]
    }

    pub fn last(&self) -> &Mat {
        self.values.last().unwrap()
    }

    pub fn at(&self, s: f64) -> Mat {
        let (k, theta) = self.grid.locate(s);
        if theta == 0.0 {
            return self.values[k].clone();
        }
        if theta == 1.0 {
            return self.values[k + 1].clone();
        }
        hermite(
            &self.values[k],
            &self.derivs[k],
            &self.values[k + 1],
            &self.derivs[k + 1],
            self.grid.step(),
            theta,
        )
    }

    /// Values at every node and midpoint of the path's grid.
    pub fn half_step_values(&self) -> Vec<Mat> {
        let mut out = Vec::with_capacity(2 * self.values.len() - 1);
        for k in 0..self.values.len() {
            out.push(self.values[k].clone());
            if k + 1 < self.values.len() {
                out.push(hermite(
                    &self.values[k],
                    &self.derivs[k],
                    &self.values[k + 1],
                    &self.derivs[k + 1],
                    self.grid.step(),
                    0.5,
                ));
            }
        }
        out
    }

    /// Values at every node and midpoint of `grid`.
    pub fn sample_refined(&self, grid: &TimeGrid) -> Vec<Mat> {
        if grid == &self.grid {
            self.half_step_values()
        } else {
            grid.refined().nodes().iter().map(|&t| self.at(t)).collect()
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.values.iter().map(asymmetry).fold(0.0, f64::max)
    }

    /// Linear-interpolating `MatrixFn` over the node samples.
    pub fn to_matrix_fn(&self) -> MatrixFn {
        MatrixFn::Sampled(
            SampledFn::on_grid(&self.grid, self.values.clone(), Interp::PiecewiseLinear)
                .expect("grid nodes are strictly increasing"),
        )
    }
}

#[derive(Debug, Clone)]
pub struct PSolution {
    pub path: MatrixPath,
    /// min over nodes of λ_min(R + DᵀPD)
    pub delta0: f64,
    pub strongly_regular: bool,
}

#[derive(Debug, Clone)]
pub struct PiSolution {
    pub path: MatrixPath,
    /// min over nodes of λ_min(R + R̄ + (D+D̄)ᵀP(D+D̄))
    pub delta_sigma: f64,
    pub sigma_positive: bool,
}

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub p: MatrixPath,
    pub pi: MatrixPath,
    pub delta0: f64,
    pub delta_sigma: f64,
    pub strongly_regular: bool,
    pub sigma_positive: bool,
}

impl RiccatiSolution {
    pub fn grid(&self) -> &TimeGrid {
        self.p.grid()
    }

    pub fn from_parts(p: PSolution, pi: PiSolution) -> Self {
        Self {
            p: p.path,
            pi: pi.path,
            delta0: p.delta0,
            delta_sigma: pi.delta_sigma,
            strongly_regular: p.strongly_regular,
            sigma_positive: pi.sigma_positive,
        }
    }
}

/// `R + DᵀPD`
pub fn sigma0(c: &Coefficients, p: &Mat) -> Mat {
    symmetrize(&(&c.r + c.d.transpose() * p * &c.d))
}

/// `R + R̄ + (D+D̄)ᵀP(D+D̄)`
pub fn sigma(c: &Coefficients, p: &Mat) -> Mat {
    let d = c.d_sum();
    symmetrize(&(c.r_sum() + d.transpose() * p * &d))
}

fn check_invertible(m: &Mat, opts: &RiccatiOptions) -> Result<(), f64> {
    let lam = min_eigenvalue(m);
    if !lam.is_finite() || lam < opts.inv_tol * m.norm().max(1.0) {
        Err(lam)
    } else {
        Ok(())
    }
}

/// Solves `Σ X = rhs` for symmetric positive definite `Σ`.
fn spd_solve(sigma: &Mat, rhs: &Mat) -> Option<Mat> {
    sigma.clone().cholesky().map(|ch| ch.solve(rhs))
}

fn p_rhs(c: &Coefficients, p: &Mat, opts: &RiccatiOptions) -> Result<Mat, RiccatiError> {
    if !is_finite(p) {
        return Err(RiccatiError::BlowUp { time: c.time, norm: f64::INFINITY });
    }
    let s0 = sigma0(c, p);
    check_invertible(&s0, opts).map_err(|min_eig| RiccatiError::SingularSigma0 { time: c.time, min_eig })?;
    let l = c.b.transpose() * p + c.d.transpose() * p * &c.c + &c.s;
    let gain = spd_solve(&s0, &l).ok_or(RiccatiError::SingularSigma0 { time: c.time, min_eig: 0.0 })?;
    let body = p * &c.a + c.a.transpose() * p + c.c.transpose() * p * &c.c + &c.q - l.transpose() * gain;
    Ok(-body)
}

fn pi_rhs(c: &Coefficients, p: &Mat, pi: &Mat, opts: &RiccatiOptions) -> Result<Mat, RiccatiError> {
    if !is_finite(pi) {
        return Err(RiccatiError::BlowUp { time: c.time, norm: f64::INFINITY });
    }
    let (a, b, cc, d) = (c.a_sum(), c.b_sum(), c.c_sum(), c.d_sum());
    let sig = sigma(c, p);
    check_invertible(&sig, opts).map_err(|min_eig| RiccatiError::SingularSigma { time: c.time, min_eig })?;
    let upsilon = c.q_sum() + cc.transpose() * p * &cc;
    let gamma = d.transpose() * p * &cc + c.s_sum();
    let l = b.transpose() * pi + &gamma;
    let gain = spd_solve(&sig, &l).ok_or(RiccatiError::SingularSigma { time: c.time, min_eig: 0.0 })?;
    let body = pi * &a + a.transpose() * pi + upsilon - l.transpose() * gain;
    Ok(-body)
}

fn check_blowup(m: &Mat, time: f64, opts: &RiccatiOptions) -> Result<(), RiccatiError> {
    let norm = m.norm();
    if !norm.is_finite() || norm > opts.blowup_cap {
        return Err(RiccatiError::BlowUp { time, norm });
    }
    Ok(())
}

/// Backward RK4 for `P` from `P(T) = G`.
pub fn solve_p(problem: &ValidatedProblem, grid: &TimeGrid, opts: &RiccatiOptions) -> Result<PSolution, RiccatiError> {
    let table = problem.tabulate(grid)?;
    let n = grid.n_steps;
    let h = -grid.step();
    let mut values = vec![Mat::zeros(0, 0); n + 1];
    values[n] = problem.g.clone();
    for k in (0..n).rev() {
        let next = rk4_step(&values[k + 1], h, |stage, y: &Mat| p_rhs(&table[stage_index(k, stage, true)], y, opts))?;
        let next = symmetrize(&next);
        check_blowup(&next, grid.node(k), opts)?;
        values[k] = next;
    }
    let mut derivs = Vec::with_capacity(n + 1);
    let mut delta0 = f64::INFINITY;
    for (k, p) in values.iter().enumerate() {
        let c = &table[2 * k];
        derivs.push(p_rhs(c, p, opts)?);
        delta0 = delta0.min(min_eigenvalue(&sigma0(c, p)));
    }
    Ok(PSolution {
        path: MatrixPath::new(*grid, values, derivs),
        delta0,
        strongly_regular: delta0 >= opts.reg_threshold,
    })
}

/// Backward RK4 for `Π` from `Π(T) = G + Ḡ`, given the `P` path.
pub fn solve_pi(
    problem: &ValidatedProblem,
    p: &PSolution,
    grid: &TimeGrid,
    opts: &RiccatiOptions,
) -> Result<PiSolution, RiccatiError> {
    let table = problem.tabulate(grid)?;
    let p_half = p.path.sample_refined(grid);
    let n = grid.n_steps;
    let h = -grid.step();
    let mut values = vec![Mat::zeros(0, 0); n + 1];
    values[n] = symmetrize(&(&problem.g + &problem.g_bar));
    for k in (0..n).rev() {
        let next = rk4_step(&values[k + 1], h, |stage, y: &Mat| {
            let idx = stage_index(k, stage, true);
            pi_rhs(&table[idx], &p_half[idx], y, opts)
        })?;
        let next = symmetrize(&next);
        check_blowup(&next, grid.node(k), opts)?;
        values[k] = next;
    }
    let mut derivs = Vec::with_capacity(n + 1);
    let mut delta_sigma = f64::INFINITY;
    for (k, pi) in values.iter().enumerate() {
        let c = &table[2 * k];
        derivs.push(pi_rhs(c, &p_half[2 * k], pi, opts)?);
        delta_sigma = delta_sigma.min(min_eigenvalue(&sigma(c, &p_half[2 * k])));
    }
    Ok(PiSolution {
        path: MatrixPath::new(*grid, values, derivs),
        delta_sigma,
        sigma_positive: delta_sigma >= opts.reg_threshold,
    })
}

/// Solves both Riccati equations on `grid`.
pub fn solve_riccati(
    problem: &ValidatedProblem,
    grid: &TimeGrid,
    opts: &RiccatiOptions,
) -> Result<RiccatiSolution, RiccatiError> {
    let p = solve_p(problem, grid, opts)?;
    if !p.strongly_regular {
        return Err(RiccatiError::SingularSigma0 { time: grid.t0, min_eig: p.delta0 });
    }
    let pi = solve_pi(problem, &p, grid, opts)?;
    if !pi.sigma_positive {
        return Err(RiccatiError::SingularSigma { time: grid.t0, min_eig: pi.delta_sigma });
    }
    Ok(RiccatiSolution::from_parts(p, pi))
}

/// Node-wise `(λ_min(Σ₀), λ_min(Σ))` along a `P` path.
pub fn sigma_margins(problem: &ValidatedProblem, p: &MatrixPath) -> Result<Vec<(f64, f64)>, ProblemError> {
    p.grid()
        .nodes()
        .iter()
        .zip(p.values())
        .map(|(&t, pk)| {
            let c = problem.coefficients_at(t)?;
            Ok((min_eigenvalue(&sigma0(&c, pk)), min_eigenvalue(&sigma(&c, pk))))
        })
        .collect()
}

fn lyapunov_rhs(c: &Coefficients, theta: &Mat, p: &Mat) -> Mat {
    let acl = &c.a + &c.b * theta;
    let ccl = &c.c + &c.d * theta;
    let cross = c.s.transpose() * theta;
    let body = p * &acl
        + acl.transpose() * p
        + ccl.transpose() * p * &ccl
        + theta.transpose() * &c.r * theta
        + &cross
        + cross.transpose()
        + &c.q;
    -body
}

/// Backward RK4 for the Lyapunov equation of a fixed gain `Θ`:
/// `P' + P(A+BΘ) + (A+BΘ)ᵀP + (C+DΘ)ᵀP(C+DΘ) + ΘᵀRΘ + SᵀΘ + ΘᵀS + Q = 0`, `P(T) = G`.
pub fn solve_lyapunov(
    problem: &ValidatedProblem,
    theta: &MatrixFn,
    grid: &TimeGrid,
) -> Result<MatrixPath, RiccatiError> {
    let table = problem.tabulate(grid)?;
    let thetas = grid
        .refined()
        .nodes()
        .iter()
        .map(|&t| eval_matrix(theta, grid, t))
        .collect::<Result<Vec<_>, _>>()?;
    let n = grid.n_steps;
    let h = -grid.step();
    let mut values = vec![Mat::zeros(0, 0); n + 1];
    values[n] = problem.g.clone();
    for k in (0..n).rev() {
        let next = rk4_step::<_, RiccatiError, _>(&values[k + 1], h, |stage, y: &Mat| {
            let idx = stage_index(k, stage, true);
            Ok(lyapunov_rhs(&table[idx], &thetas[idx], y))
        })?;
        let next = symmetrize(&next);
        if !is_finite(&next) {
            return Err(RiccatiError::BlowUp { time: grid.node(k), norm: f64::INFINITY });
        }
        values[k] = next;
    }
    let derivs = values
        .iter()
        .enumerate()
        .map(|(k, p)| lyapunov_rhs(&table[2 * k], &thetas[2 * k], p))
        .collect();
    Ok(MatrixPath::new(*grid, values, derivs))
}

/// Optimal feedback gains sampled at every node and midpoint of the solver
/// grid (linear interpolation in between).
#[derive(Debug, Clone)]
pub struct GainSet {
    /// `Θ = -Σ₀⁻¹(BᵀP + DᵀPC + S)`, gain on `X - E[X]`
    pub theta: MatrixFn,
    /// `Θ̄ = -Σ⁻¹((B+B̄)ᵀΠ + (D+D̄)ᵀP(C+C̄) + S + S̄)`, gain on `E[X]`
    pub theta_bar: MatrixFn,
}

pub fn theta_at(c: &Coefficients, p: &Mat) -> Result<Mat, RiccatiError> {
    let s0 = sigma0(c, p);
    let l = c.b.transpose() * p + c.d.transpose() * p * &c.c + &c.s;
    spd_solve(&s0, &l)
        .map(|g| -g)
        .ok_or(RiccatiError::SingularSigma0 { time: c.time, min_eig: min_eigenvalue(&s0) })
}

pub fn theta_bar_at(c: &Coefficients, p: &Mat, pi: &Mat) -> Result<Mat, RiccatiError> {
    let (b, cc, d) = (c.b_sum(), c.c_sum(), c.d_sum());
    let sig = sigma(c, p);
    let l = b.transpose() * pi + d.transpose() * p * &cc + c.s_sum();
    spd_solve(&sig, &l)
        .map(|g| -g)
        .ok_or(RiccatiError::SingularSigma { time: c.time, min_eig: min_eigenvalue(&sig) })
}

pub fn feedback_gains(problem: &ValidatedProblem, riccati: &RiccatiSolution) -> Result<GainSet, RiccatiError> {
    let grid = riccati.grid();
    let table = problem.tabulate(grid)?;
    let p_half = riccati.p.half_step_values();
    let pi_half = riccati.pi.half_step_values();
    let mut theta = Vec::with_capacity(table.len());
    let mut theta_bar = Vec::with_capacity(table.len());
    for (j, c) in table.iter().enumerate() {
        theta.push(theta_at(c, &p_half[j])?);
        theta_bar.push(theta_bar_at(c, &p_half[j], &pi_half[j])?);
    }
    let fine = grid.refined();
    Ok(GainSet {
        theta: MatrixFn::Sampled(SampledFn::on_grid(&fine, theta, Interp::PiecewiseLinear)?),
        theta_bar: MatrixFn::Sampled(SampledFn::on_grid(&fine, theta_bar, Interp::PiecewiseLinear)?),
    })
}

/// One violated clause of a sufficient condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub clause: String,
    pub time: f64,
    /// the smallest eigenvalue (or norm, for the `S = 0` clause) found
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub holds: bool,
    /// largest δ ≥ 0 with `R ≥ δI` and `R + R̄ ≥ δI` at every node
    pub delta: f64,
    pub violations: Vec<Violation>,
}

impl ConditionReport {
    pub fn first_violation(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

struct ClauseTracker {
    tol: f64,
    worst: Vec<(String, f64, f64)>,
}

impl ClauseTracker {
    fn new(tol: f64) -> Self {
        Self { tol, worst: Vec::new() }
    }

    /// Records `value` for a clause that requires `value >= 0`.
    fn nonneg(&mut self, clause: &str, time: f64, value: f64) {
        match self.worst.iter_mut().find(|w| w.0 == clause) {
            Some(w) if value < w.2 => {
                w.1 = time;
                w.2 = value;
            }
            Some(_) => {}
            None => self.worst.push((clause.to_string(), time, value)),
        }
    }

    fn into_violations(self) -> Vec<Violation> {
        let tol = self.tol;
        self.worst
            .into_iter()
            .filter(|w| !(w.2 >= -tol))
            .map(|(clause, time, value)| Violation { clause, time, value })
            .collect()
    }
}

fn terminal_clauses(problem: &ValidatedProblem, tracker: &mut ClauseTracker) {
    let t = problem.grid.t_end;
    tracker.nonneg("G >= 0", t, min_eigenvalue(&problem.g));
    tracker.nonneg("G + Gbar >= 0", t, min_eigenvalue(&(&problem.g + &problem.g_bar)));
}

fn finish(tracker: ClauseTracker, delta: f64) -> ConditionReport {
    let mut violations = tracker.into_violations();
    if !(delta > 0.0) {
        violations.push(Violation { clause: "delta > 0".into(), time: f64::NAN, value: delta });
    }
    ConditionReport { holds: violations.is_empty(), delta: delta.max(0.0), violations }
}

/// `G, G+Ḡ ≥ 0`, `Q, Q+Q̄ ≥ 0`, `S = S̄ = 0`, `R, R+R̄ ≥ δI` at every node.
pub fn check_classic_condition(problem: &ValidatedProblem) -> Result<ConditionReport, ProblemError> {
    let mut tracker = ClauseTracker::new(crate::problem::DEFAULT_PSD_TOL);
    terminal_clauses(problem, &mut tracker);
    let mut delta = f64::INFINITY;
    for t in problem.grid.nodes() {
        let c = problem.coefficients_at(t)?;
        tracker.nonneg("Q >= 0", t, min_eigenvalue(&c.q));
        tracker.nonneg("Q + Qbar >= 0", t, min_eigenvalue(&c.q_sum()));
        tracker.nonneg("S = 0", t, -c.s.norm());
        tracker.nonneg("Sbar = 0", t, -c.s_bar.norm());
        let (lr, lrr) = (min_eigenvalue(&c.r), min_eigenvalue(&c.r_sum()));
        tracker.nonneg("R >= delta I", t, lr);
        tracker.nonneg("R + Rbar >= delta I", t, lrr);
        delta = delta.min(lr).min(lrr);
    }
    Ok(finish(tracker, delta))
}

/// `G, G+Ḡ ≥ 0`, `R, R+R̄ ≥ δI`, `Q - SᵀR⁻¹S ≥ 0` and
/// `Q+Q̄ - (S+S̄)ᵀ(R+R̄)⁻¹(S+S̄) ≥ 0` at every node.
pub fn check_standard_condition(problem: &ValidatedProblem) -> Result<ConditionReport, ProblemError> {
    let mut tracker = ClauseTracker::new(crate::problem::DEFAULT_PSD_TOL);
    terminal_clauses(problem, &mut tracker);
    let mut delta = f64::INFINITY;
    for t in problem.grid.nodes() {
        let c = problem.coefficients_at(t)?;
        let (lr, lrr) = (min_eigenvalue(&c.r), min_eigenvalue(&c.r_sum()));
        tracker.nonneg("R >= delta I", t, lr);
        tracker.nonneg("R + Rbar >= delta I", t, lrr);
        delta = delta.min(lr).min(lrr);
        let schur = |q: Mat, s: Mat, r: Mat| spd_solve(&r, &s).map(|x| min_eigenvalue(&(q - s.transpose() * x)));
        tracker.nonneg(
            "Q - S'R^-1 S >= 0",
            t,
            schur(c.q.clone(), c.s.clone(), c.r.clone()).unwrap_or(f64::NEG_INFINITY),
        );
        tracker.nonneg(
            "Q + Qbar - (S+Sbar)'(R+Rbar)^-1 (S+Sbar) >= 0",
            t,
            schur(c.q_sum(), c.s_sum(), c.r_sum()).unwrap_or(f64::NEG_INFINITY),
        );
    }
    Ok(finish(tracker, delta))
}
