//! Exact first and second moments of the state under an affine law
//! `u = K(X - E[X]) + K̄E[X] + k`, and the exact cost built from them.
//!
//! With `m = E[X]`, `ū = K̄m + k` and `V = Cov[X]`:
//!
//! ```text
//! m' = (A+Ā)m + (B+B̄)ū + b
//! V' = (A+BK)V + V(A+BK)ᵀ + (C+DK)V(C+DK)ᵀ + ddᵀ,   d = σ + (C+C̄)m + (D+D̄)ū
//! ```
//!
//! The covariance equation follows from the centred dynamics
//! `dz = (A+BK)z ds + [(C+DK)z + d] dW` by Itô's formula and `E[z] = 0`.

use crate::linalg::{is_finite, rk4_step, simpson, symmetrize, Mat, OdeState, Vect};
use crate::problem::{stage_index, AffineControlLaw, Coefficients, InitialLaw, LawValues, ProblemError, TimeGrid, ValidatedProblem};

#[derive(Debug, Clone)]
pub struct MomentPath {
    pub grid: TimeGrid,
    pub mean: Vec<Vect>,
    pub cov: Vec<Mat>,
    /// `E[u] = K̄m + k` at each node
    pub mean_control: Vec<Vect>,
    /// `E|u|² = tr(KVKᵀ) + |E[u]|²` at each node
    pub control_energy: Vec<f64>,
}

#[derive(Clone)]
struct Moments {
    m: Mat,
    v: Mat,
}

impl OdeState for Moments {
    fn axpy(&self, h: f64, k: &Self) -> Self {
        Moments { m: &self.m + &k.m * h, v: &self.v + &k.v * h }
    }
}

fn moment_rhs(c: &Coefficients, law: &LawValues, y: &Moments) -> Moments {
    let ubar = law.mean_control(&y.m);
    let m_dot = c.a_sum() * &y.m + c.b_sum() * &ubar + &c.drift;
    let acl = &c.a + &c.b * &law.gain;
    let ccl = &c.c + &c.d * &law.gain;
    let d = &c.diffusion + c.c_sum() * &y.m + c.d_sum() * &ubar;
    let av = &acl * &y.v;
    let v_dot = &av + av.transpose() + &ccl * &y.v * ccl.transpose() + &d * d.transpose();
    Moments { m: m_dot, v: v_dot }
}

fn to_vect(m: &Mat) -> Vect {
    Vect::from_column_slice(m.as_slice())
}

/// Forward RK4 on the problem's grid from the initial mean and covariance.
pub fn propagate_moments(
    problem: &ValidatedProblem,
    law: &AffineControlLaw,
    law0: &InitialLaw,
) -> Result<MomentPath, ProblemError> {
    law0.validate(problem.n)?;
    law.validate(problem.n, problem.m, &problem.grid)?;
    let grid = problem.grid;
    let table = problem.tabulate(&grid)?;
    let laws = law.tabulate(&grid)?;
    let n = grid.n_steps;
    let mut state = Moments { m: Mat::from_column_slice(problem.n, 1, law0.mean.as_slice()), v: law0.cov.clone() };
    let mut states = Vec::with_capacity(n + 1);
    states.push(state.clone());
    for k in 0..n {
        let next = rk4_step::<_, ProblemError, _>(&state, grid.step(), |stage, y| {
            let i = stage_index(k, stage, false);
            Ok(moment_rhs(&table[i], &laws[i], y))
        })?;
        state = Moments { m: next.m, v: symmetrize(&next.v) };
        if !is_finite(&state.m) || !is_finite(&state.v) {
            return Err(ProblemError::NonFinite { name: "moments".into(), s: grid.node(k + 1) });
        }
        states.push(state.clone());
    }
    let mut path = MomentPath {
        grid,
        mean: Vec::with_capacity(n + 1),
        cov: Vec::with_capacity(n + 1),
        mean_control: Vec::with_capacity(n + 1),
        control_energy: Vec::with_capacity(n + 1),
    };
    for (k, s) in states.into_iter().enumerate() {
        let lv = &laws[2 * k];
        let ubar = lv.mean_control(&s.m);
        let energy = (&lv.gain * &s.v * lv.gain.transpose()).trace() + ubar.norm_squared();
        path.mean.push(to_vect(&s.m));
        path.mean_control.push(to_vect(&ubar));
        path.control_energy.push(energy);
        path.cov.push(s.v);
    }
    Ok(path)
}

/// Running cost density at one node given the moments there.
pub(crate) fn running_cost(c: &Coefficients, gain: &Mat, m: &Vect, v: &Mat, ubar: &Vect) -> f64 {
    let cross = c.s.transpose() * gain;
    let w = &c.q + gain.transpose() * &c.r * gain + &cross + cross.transpose();
    let quad_dev = (w * v).trace();
    let quad_mean = m.dot(&(c.q_sum() * m)) + 2.0 * ubar.dot(&(c.s_sum() * m)) + ubar.dot(&(c.r_sum() * ubar));
    let lin = 2.0 * (&c.q_lin + &c.q_bar_lin).column(0).dot(m) + 2.0 * (&c.rho + &c.rho_bar).column(0).dot(ubar);
    quad_dev + quad_mean + lin
}

/// Terminal cost `tr(G V) + ⟨(G+Ḡ)m, m⟩ + 2⟨g+ḡ, m⟩`.
pub(crate) fn terminal_cost(problem: &ValidatedProblem, m: &Vect, v: &Mat) -> f64 {
    (&problem.g * v).trace() + m.dot(&((&problem.g + &problem.g_bar) * m)) + 2.0 * (&problem.g_lin + &problem.g_bar_lin).dot(m)
}

/// Cost of the moment path; exact up to the RK4 and Simpson discretisation.
pub fn cost_of_path(problem: &ValidatedProblem, law: &AffineControlLaw, path: &MomentPath) -> Result<f64, ProblemError> {
    let grid = path.grid;
    let mut integrand = Vec::with_capacity(grid.len());
    for (k, t) in grid.nodes().into_iter().enumerate() {
        let c = problem.coefficients_at(t)?;
        let gain = law.gain().eval(t)?;
        integrand.push(running_cost(&c, &gain, &path.mean[k], &path.cov[k], &path.mean_control[k]));
    }
    let last = grid.n_steps;
    Ok(terminal_cost(problem, &path.mean[last], &path.cov[last]) + simpson(&integrand, grid.step()))
}

pub fn exact_cost(problem: &ValidatedProblem, law: &AffineControlLaw, law0: &InitialLaw) -> Result<f64, ProblemError> {
    let path = propagate_moments(problem, law, law0)?;
    cost_of_path(problem, law, &path)
}

/// `E ∫ |u|² ds`
pub fn control_norm(problem: &ValidatedProblem, law: &AffineControlLaw, law0: &InitialLaw) -> Result<f64, ProblemError> {
    let path = propagate_moments(problem, law, law0)?;
    Ok(simpson(&path.control_energy, path.grid.step()))
}
