//! Inhomogeneous part of the optimal feedback: the backward equations for
//! `η` and `η̄`, the offsets `φ`, `φ̄`, the value function, and the cost of
//! the deterministic LQ problem that governs the mean.
//!
//! All drivers `b, σ, q, ρ, g` are deterministic, so the martingale part of
//! the `η` equation vanishes and both equations are linear ODEs.

use crate::linalg::{is_finite, rk4_step, simpson, Mat, Vect};
use crate::problem::{
    sample_refined, stage_index, AffineControlLaw, InitialLaw, Interp, MatrixFn, SampledFn, TimeGrid,
    ValidatedProblem,
};
use crate::riccati::{
    feedback_gains, sigma, sigma0, solve_riccati, GainSet, MatrixPath, RiccatiError, RiccatiOptions, RiccatiSolution,
};

#[derive(Debug, Clone)]
pub struct AuxiliarySolution {
    pub eta: MatrixPath,
    pub eta_bar: MatrixPath,
    pub phi: MatrixFn,
    pub phi_bar: MatrixFn,
    /// The martingale component of the `η` equation; identically zero for
    /// deterministic drivers.
    pub zeta_is_zero: bool,
}

fn integrate_backward<F>(grid: &TimeGrid, terminal: Mat, mut rhs: F) -> Result<MatrixPath, RiccatiError>
where
    F: FnMut(usize, &Mat) -> Mat,
{
    let n = grid.n_steps;
    let h = -grid.step();
    let mut values = vec![Mat::zeros(0, 0); n + 1];
    values[n] = terminal;
    for k in (0..n).rev() {
        let next =
            rk4_step::<_, RiccatiError, _>(&values[k + 1], h, |stage, y| Ok(rhs(stage_index(k, stage, true), y)))?;
        if !is_finite(&next) {
            return Err(RiccatiError::BlowUp { time: grid.node(k), norm: f64::INFINITY });
        }
        values[k] = next;
    }
    let derivs = values.iter().enumerate().map(|(k, y)| rhs(2 * k, y)).collect();
    Ok(MatrixPath::new(*grid, values, derivs))
}

fn col(v: &Vect) -> Mat {
    Mat::from_column_slice(v.len(), 1, v.as_slice())
}

/// `η' = -[(A+BΘ)ᵀη + (C+DΘ)ᵀPσ + Θᵀρ + Pb + q]`, `η(T) = g`, on the grid of `p`.
pub fn solve_eta(problem: &ValidatedProblem, p: &MatrixPath, theta: &MatrixFn) -> Result<MatrixPath, RiccatiError> {
    let grid = *p.grid();
    let table = problem.tabulate(&grid)?;
    let p_half = p.sample_refined(&grid);
    let th = sample_refined(theta, &grid)?;
    integrate_backward(&grid, col(&problem.g_lin), |i, eta| {
        let (c, p, th) = (&table[i], &p_half[i], &th[i]);
        let acl = &c.a + &c.b * th;
        let ccl = &c.c + &c.d * th;
        -(acl.transpose() * eta + ccl.transpose() * p * &c.diffusion + th.transpose() * &c.rho + p * &c.drift + &c.q_lin)
    })
}

/// `η̄' = -{[(A+Ā) + (B+B̄)Θ̄]ᵀη̄ + Θ̄ᵀ[(D+D̄)ᵀPσ + ρ + ρ̄] + (C+C̄)ᵀPσ + q + q̄ + Πb}`,
/// `η̄(T) = g + ḡ`.
pub fn solve_eta_bar(
    problem: &ValidatedProblem,
    p: &MatrixPath,
    pi: &MatrixPath,
    theta_bar: &MatrixFn,
) -> Result<MatrixPath, RiccatiError> {
    let grid = *p.grid();
    let table = problem.tabulate(&grid)?;
    let p_half = p.sample_refined(&grid);
    let pi_half = pi.sample_refined(&grid);
    let thb = sample_refined(theta_bar, &grid)?;
    let terminal = col(&(&problem.g_lin + &problem.g_bar_lin));
    integrate_backward(&grid, terminal, |i, eb| {
        let (c, p, pi, thb) = (&table[i], &p_half[i], &pi_half[i], &thb[i]);
        let psig = p * &c.diffusion;
        let acl = c.a_sum() + c.b_sum() * thb;
        let inner = c.d_sum().transpose() * &psig + &c.rho + &c.rho_bar;
        -(acl.transpose() * eb
            + thb.transpose() * inner
            + c.c_sum().transpose() * &psig
            + &c.q_lin
            + &c.q_bar_lin
            + pi * &c.drift)
    })
}

/// `φ = -Σ₀⁻¹[Bᵀη + DᵀPσ + ρ]` and `φ̄ = -Σ⁻¹[(B+B̄)ᵀη̄ + (D+D̄)ᵀPσ + ρ + ρ̄]`,
/// sampled on nodes and midpoints of the grid of `p`.
pub fn offsets(
    problem: &ValidatedProblem,
    p: &MatrixPath,
    eta: &MatrixPath,
    eta_bar: &MatrixPath,
) -> Result<(MatrixFn, MatrixFn), RiccatiError> {
    let grid = *p.grid();
    let table = problem.tabulate(&grid)?;
    let p_half = p.sample_refined(&grid);
    let eta_half = eta.sample_refined(&grid);
    let eb_half = eta_bar.sample_refined(&grid);
    let mut phi = Vec::with_capacity(table.len());
    let mut phi_bar = Vec::with_capacity(table.len());
    for (i, c) in table.iter().enumerate() {
        let p = &p_half[i];
        let psig = p * &c.diffusion;
        let s0 = sigma0(c, p);
        let rhs0 = c.b.transpose() * &eta_half[i] + c.d.transpose() * &psig + &c.rho;
        phi.push(-s0.clone().cholesky().ok_or(RiccatiError::SingularSigma0 { time: c.time, min_eig: 0.0 })?.solve(&rhs0));
        let s = sigma(c, p);
        let rhs = c.b_sum().transpose() * &eb_half[i] + c.d_sum().transpose() * &psig + &c.rho + &c.rho_bar;
        phi_bar.push(-s.clone().cholesky().ok_or(RiccatiError::SingularSigma { time: c.time, min_eig: 0.0 })?.solve(&rhs));
    }
    let fine = grid.refined();
    Ok((
        MatrixFn::Sampled(SampledFn::on_grid(&fine, phi, Interp::PiecewiseLinear)?),
        MatrixFn::Sampled(SampledFn::on_grid(&fine, phi_bar, Interp::PiecewiseLinear)?),
    ))
}

pub fn solve_auxiliary(
    problem: &ValidatedProblem,
    riccati: &RiccatiSolution,
    gains: &GainSet,
) -> Result<AuxiliarySolution, RiccatiError> {
    let eta = solve_eta(problem, &riccati.p, &gains.theta)?;
    let eta_bar = solve_eta_bar(problem, &riccati.p, &riccati.pi, &gains.theta_bar)?;
    let (phi, phi_bar) = offsets(problem, &riccati.p, &eta, &eta_bar)?;
    Ok(AuxiliarySolution { eta, eta_bar, phi, phi_bar, zeta_is_zero: true })
}

/// `V(t0, ξ) = tr(P(t0) Cov ξ) + ⟨Π(t0)Eξ, Eξ⟩ + 2⟨η̄(t0), Eξ⟩
///             + ∫ ⟨Pσ, σ⟩ + 2⟨η̄, b⟩ - ⟨Σφ̄, φ̄⟩ ds`.
pub fn value_at(
    problem: &ValidatedProblem,
    riccati: &RiccatiSolution,
    aux: &AuxiliarySolution,
    law0: &InitialLaw,
) -> Result<f64, RiccatiError> {
    law0.validate(problem.n)?;
    let grid = *riccati.grid();
    let mu = col(&law0.mean);
    let p0 = riccati.p.first();
    let mut v = (p0 * &law0.cov).trace()
        + (mu.transpose() * riccati.pi.first() * &mu)[(0, 0)]
        + 2.0 * (aux.eta_bar.first().transpose() * &mu)[(0, 0)];
    let mut integrand = Vec::with_capacity(grid.len());
    for (k, t) in grid.nodes().into_iter().enumerate() {
        let c = problem.coefficients_at(t)?;
        let p = riccati.p.node(k);
        let eb = aux.eta_bar.node(k);
        let phib = aux.phi_bar.eval(t)?;
        let sig = sigma(&c, p);
        let term = c.diffusion.transpose() * p * &c.diffusion + 2.0 * eb.transpose() * &c.drift
            - phib.transpose() * sig * &phib;
        integrand.push(term[(0, 0)]);
    }
    v += simpson(&integrand, grid.step());
    Ok(v)
}

/// Weights of the deterministic LQ problem at one time:
/// `Υ = Q+Q̄ + (C+C̄)ᵀP(C+C̄)`, `Γ = (D+D̄)ᵀP(C+C̄) + S+S̄`, `Σ`.
fn dlq_weights(c: &crate::problem::Coefficients, p: &Mat) -> (Mat, Mat, Mat) {
    let cc = c.c_sum();
    let upsilon = c.q_sum() + cc.transpose() * p * &cc;
    let gamma = c.d_sum().transpose() * p * &cc + c.s_sum();
    (upsilon, gamma, sigma(c, p))
}

/// Cost of the deterministic LQ problem `y' = (A+Ā)y + (B+B̄)w`, `y(t0) = x0`,
/// `J̄ = ⟨(G+Ḡ)y(T), y(T)⟩ + ∫ ⟨Υy, y⟩ + 2⟨Γy, w⟩ + ⟨Σw, w⟩ ds`, under the
/// open-loop control `w = v`.
pub fn dlq_cost(problem: &ValidatedProblem, p: &MatrixPath, v: &MatrixFn, x0: &Vect) -> Result<f64, RiccatiError> {
    let zero = MatrixFn::zeros(problem.m, problem.n);
    dlq_cost_feedback(problem, p, &zero, v, x0)
}

/// As [`dlq_cost`] with the feedback control `w = Θy + v`.
pub fn dlq_cost_feedback(
    problem: &ValidatedProblem,
    p: &MatrixPath,
    theta: &MatrixFn,
    v: &MatrixFn,
    x0: &Vect,
) -> Result<f64, RiccatiError> {
    let grid = *p.grid();
    let table = problem.tabulate(&grid)?;
    let p_half = p.sample_refined(&grid);
    let th = sample_refined(theta, &grid)?;
    let vv = sample_refined(v, &grid)?;
    let n = grid.n_steps;
    let mut ys = Vec::with_capacity(n + 1);
    ys.push(col(x0));
    for k in 0..n {
        let next = rk4_step::<_, RiccatiError, _>(&ys[k], grid.step(), |stage, y| {
            let i = stage_index(k, stage, false);
            let c = &table[i];
            Ok(c.a_sum() * y + c.b_sum() * (&th[i] * y + &vv[i]))
        })?;
        if !is_finite(&next) {
            return Err(RiccatiError::BlowUp { time: grid.node(k + 1), norm: f64::INFINITY });
        }
        ys.push(next);
    }
    let integrand: Vec<f64> = ys
        .iter()
        .enumerate()
        .map(|(k, y)| {
            let i = 2 * k;
            let (ups, gam, sig) = dlq_weights(&table[i], &p_half[i]);
            let w = &th[i] * y + &vv[i];
            (y.transpose() * ups * y + 2.0 * w.transpose() * gam * y + w.transpose() * sig * &w)[(0, 0)]
        })
        .collect();
    let yt = &ys[n];
    let terminal = (yt.transpose() * (&problem.g + &problem.g_bar) * yt)[(0, 0)];
    Ok(terminal + simpson(&integrand, grid.step()))
}

/// Riccati paths, gains, auxiliary solution and the resulting optimal law
/// `u* = Θ(X - E[X]) + Θ̄E[X] + φ̄`.
#[derive(Debug, Clone)]
pub struct OptimalSolution {
    pub riccati: RiccatiSolution,
    pub gains: GainSet,
    pub aux: AuxiliarySolution,
    pub law: AffineControlLaw,
}

impl OptimalSolution {
    pub fn value(&self, problem: &ValidatedProblem, law0: &InitialLaw) -> Result<f64, RiccatiError> {
        value_at(problem, &self.riccati, &self.aux, law0)
    }
}

/// Runs the whole Riccati pipeline on the problem's own grid.
pub fn solve_optimal(problem: &ValidatedProblem, opts: &RiccatiOptions) -> Result<OptimalSolution, RiccatiError> {
    let riccati = solve_riccati(problem, &problem.grid, opts)?;
    let gains = feedback_gains(problem, &riccati)?;
    let aux = solve_auxiliary(problem, &riccati, &gains)?;
    let law = AffineControlLaw::new(gains.theta.clone(), gains.theta_bar.clone(), aux.phi_bar.clone());
    Ok(OptimalSolution { riccati, gains, aux, law })
}
