//! Euler–Maruyama simulation under affine laws with the exact mean field
//! substituted, Monte-Carlo cost estimates, and the quadratic expansion of
//! the cost along a direction.
//!
//! Path `i` draws from a ChaCha8 stream selected by `(seed, i)`; within the
//! stream the initial-state normals come first, then one draw per step.
//! Paths are simulated in fixed chunks and chunk statistics are merged in
//! chunk order, so results do not depend on the thread count.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::linalg::{min_eigenvalue, symmetrize, trapezoid, Mat, Vect};
use crate::moments::{exact_cost, propagate_moments, MomentPath};
use crate::problem::{
    AffineControlLaw, InitialLaw, MatrixFn, ProblemError, SamplerKind, TimeGrid, ValidatedProblem,
};

const CHUNK: usize = 512;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("non-finite state on path {path} at step {step}")]
    NonFinite { path: usize, step: usize },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub grid: TimeGrid,
    pub antithetic: bool,
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64, grid: TimeGrid) -> Self {
        Self { n_paths, seed, grid, antithetic: false }
    }

    pub fn antithetic(self, on: bool) -> Self {
        Self { antithetic: on, ..self }
    }

    fn validate(&self) -> Result<(), MonteCarloError> {
        if self.n_paths < 2 {
            return Err(MonteCarloError::Config("n_paths must be at least 2".into()));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(MonteCarloError::Config("antithetic sampling needs an even n_paths".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

impl CostEstimate {
    /// `|mean - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.std_error == 0.0 {
            if self.mean == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - target).abs() / self.std_error
        }
    }
}

/// Running mean and centred second moment of a vector sample.
#[derive(Debug, Clone)]
struct Welford {
    count: f64,
    mean: Vect,
    m2: Mat,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Self { count: 0.0, mean: Vect::zeros(dim), m2: Mat::zeros(dim, dim) }
    }

    fn push(&mut self, x: &Vect) {
        self.count += 1.0;
        let delta = x - &self.mean;
        self.mean += &delta / self.count;
        let delta2 = x - &self.mean;
        self.m2 += &delta * delta2.transpose();
    }

    fn merge(&mut self, other: &Welford) {
        if other.count == 0.0 {
            return;
        }
        let n = self.count + other.count;
        let delta = &other.mean - &self.mean;
        self.m2 += &other.m2 + &delta * delta.transpose() * (self.count * other.count / n);
        self.mean += delta * (other.count / n);
        self.count = n;
    }

    fn covariance(&self) -> Mat {
        if self.count < 2.0 {
            return Mat::zeros(self.mean.len(), self.mean.len());
        }
        symmetrize(&(&self.m2 / (self.count - 1.0)))
    }
}

/// Per-step data of the Euler scheme and the per-path cost, precomputed
/// from the moment path.
struct Prepared {
    n: usize,
    h: f64,
    sqrt_h: f64,
    /// drift `F X + f`
    drift_mat: Vec<Mat>,
    drift_vec: Vec<Vect>,
    /// diffusion `G X + g`
    diff_mat: Vec<Mat>,
    diff_vec: Vec<Vect>,
    /// running cost `Xᵀ W X + 2 wᵀX + w0`
    cost_mat: Vec<Mat>,
    cost_vec: Vec<Vect>,
    cost_const: Vec<f64>,
    terminal_mat: Mat,
    terminal_vec: Vect,
    terminal_const: f64,
    init_mean: Vect,
    init_factor: Option<Mat>,
    normal: Normal,
}

fn prepare(
    problem: &ValidatedProblem,
    law: &AffineControlLaw,
    law0: &InitialLaw,
    grid: &TimeGrid,
) -> Result<(Prepared, MomentPath), MonteCarloError> {
    let problem = problem.with_grid(*grid)?;
    let moments = propagate_moments(&problem, law, law0)?;
    let nodes = grid.nodes();
    let mut p = Prepared {
        n: problem.n,
        h: grid.step(),
        sqrt_h: grid.step().sqrt(),
        drift_mat: Vec::with_capacity(nodes.len()),
        drift_vec: Vec::with_capacity(nodes.len()),
        diff_mat: Vec::with_capacity(nodes.len()),
        diff_vec: Vec::with_capacity(nodes.len()),
        cost_mat: Vec::with_capacity(nodes.len()),
        cost_vec: Vec::with_capacity(nodes.len()),
        cost_const: Vec::with_capacity(nodes.len()),
        terminal_mat: problem.g.clone(),
        terminal_vec: Vect::zeros(problem.n),
        terminal_const: 0.0,
        init_mean: law0.mean.clone(),
        init_factor: None,
        normal: Normal::standard(),
    };
    for (k, &t) in nodes.iter().enumerate() {
        let c = problem.coefficients_at(t)?;
        let gain = law.gain().eval(t)?;
        let m = &moments.mean[k];
        let ubar = &moments.mean_control[k];
        // u = K X + cu with cu = ū - K m
        let cu = ubar - &gain * m;
        let col = |v: &Mat| Vect::from_column_slice(v.as_slice());
        p.drift_mat.push(&c.a + &c.b * &gain);
        p.drift_vec.push(&c.a_bar * m + &c.b * &cu + &c.b_bar * ubar + col(&c.drift));
        p.diff_mat.push(&c.c + &c.d * &gain);
        p.diff_vec.push(&c.c_bar * m + &c.d * &cu + &c.d_bar * ubar + col(&c.diffusion));
        let cross = c.s.transpose() * &gain;
        p.cost_mat.push(symmetrize(&(&c.q + gain.transpose() * &c.r * &gain + &cross + cross.transpose())));
        let rho = col(&c.rho);
        p.cost_vec.push(col(&c.q_lin) + c.s.transpose() * &cu + gain.transpose() * (&c.r * &cu + &rho));
        let mean_part = m.dot(&(&c.q_bar * m))
            + 2.0 * ubar.dot(&(&c.s_bar * m))
            + ubar.dot(&(&c.r_bar * ubar))
            + 2.0 * col(&c.q_bar_lin).dot(m)
            + 2.0 * col(&c.rho_bar).dot(ubar);
        p.cost_const.push(cu.dot(&(&c.r * &cu)) + 2.0 * rho.dot(&cu) + mean_part);
    }
    let mt = &moments.mean[grid.n_steps];
    p.terminal_vec = problem.g_lin.clone();
    p.terminal_const = mt.dot(&(&problem.g_bar * mt)) + 2.0 * problem.g_bar_lin.dot(mt);
    if law0.kind == SamplerKind::Gaussian && min_eigenvalue(&law0.cov) > 0.0 {
        p.init_factor = law0.cov.clone().cholesky().map(|ch| ch.l());
    } else if law0.kind == SamplerKind::Gaussian && law0.cov.iter().any(|v| *v != 0.0) {
        // semidefinite: factor through the eigen-decomposition
        let eig = nalgebra::SymmetricEigen::new(symmetrize(&law0.cov));
        let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        p.init_factor = Some(&eig.eigenvectors * Mat::from_diagonal(&sqrt_vals));
    }
    Ok((p, moments))
}

impl Prepared {
    fn gaussian(&self, rng: &mut ChaCha8Rng) -> f64 {
        let bits = rng.next_u64() >> 11;
        let u = (bits as f64 + 0.5) / (1u64 << 53) as f64;
        self.normal.inverse_cdf(u)
    }

    fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }

    /// Simulates one path, calling `visit(k, X_k)` at every node; returns the path cost.
    fn simulate<F: FnMut(usize, &Vect)>(
        &self,
        cfg: &SimConfig,
        path: usize,
        mut visit: F,
    ) -> Result<f64, MonteCarloError> {
        let (stream, sign) = if cfg.antithetic { (path / 2, if path.is_multiple_of(2) { 1.0 } else { -1.0 }) } else { (path, 1.0) };
        let mut rng = Self::rng(cfg.seed, stream as u64);
        let mut x = self.init_mean.clone();
        if let Some(l) = &self.init_factor {
            let z = Vect::from_fn(self.n, |_, _| sign * self.gaussian(&mut rng));
            x += l * z;
        }
        let steps = self.drift_mat.len() - 1;
        let mut running = Vec::with_capacity(steps + 1);
        let mut drift = Vect::zeros(self.n);
        let mut diff = Vect::zeros(self.n);
        for k in 0..=steps {
            visit(k, &x);
            running.push(x.dot(&(&self.cost_mat[k] * &x)) + 2.0 * self.cost_vec[k].dot(&x) + self.cost_const[k]);
            if k == steps {
                break;
            }
            let dw = sign * self.sqrt_h * self.gaussian(&mut rng);
            drift.copy_from(&self.drift_vec[k]);
            drift.gemv(1.0, &self.drift_mat[k], &x, 1.0);
            diff.copy_from(&self.diff_vec[k]);
            diff.gemv(1.0, &self.diff_mat[k], &x, 1.0);
            x.axpy(self.h, &drift, 1.0);
            x.axpy(dw, &diff, 1.0);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(MonteCarloError::NonFinite { path, step: k + 1 });
            }
        }
        let terminal = x.dot(&(&self.terminal_mat * &x)) + 2.0 * self.terminal_vec.dot(&x) + self.terminal_const;
        Ok(terminal + trapezoid(&running, self.h))
    }
}

/// Runs `work` on fixed chunks of sample indices in parallel and merges the
/// chunk results in chunk order.
fn chunked<A, W, M>(n_samples: usize, work: W, mut merge: M) -> Result<Option<A>, MonteCarloError>
where
    A: Send,
    W: Fn(std::ops::Range<usize>) -> Result<A, MonteCarloError> + Sync,
    M: FnMut(&mut A, A),
{
    let n_chunks = n_samples.div_ceil(CHUNK);
    let parts: Vec<Result<A, MonteCarloError>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| work(c * CHUNK..((c + 1) * CHUNK).min(n_samples)))
        .collect();
    let mut acc: Option<A> = None;
    for part in parts {
        let part = part?;
        match acc.as_mut() {
            None => acc = Some(part),
            Some(a) => merge(a, part),
        }
    }
    Ok(acc)
}

/// All simulated states, `paths[i][k]` = state of path `i` at node `k`.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub grid: TimeGrid,
    pub paths: Vec<Vec<Vect>>,
    pub costs: Vec<f64>,
}

/// Simulates and stores every path; meant for small ensembles.
pub fn simulate_paths(
    problem: &ValidatedProblem,
    law: &AffineControlLaw,
    law0: &InitialLaw,
    cfg: &SimConfig,
) -> Result<PathEnsemble, MonteCarloError> {
    cfg.validate()?;
    let (prep, _) = prepare(problem, law, law0, &cfg.grid)?;
    let results: Vec<Result<(Vec<Vect>, f64), MonteCarloError>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| {
            let mut states = Vec::with_capacity(cfg.grid.len());
            let cost = prep.simulate(cfg, i, |_, x| states.push(x.clone()))?;
            Ok((states, cost))
        })
        .collect();
    let mut ens = PathEnsemble { grid: cfg.grid, paths: Vec::with_capacity(cfg.n_paths), costs: Vec::with_capacity(cfg.n_paths) };
    for r in results {
        let (states, cost) = r?;
        ens.paths.push(states);
        ens.costs.push(cost);
    }
    Ok(ens)
}

/// Node-wise sample mean and covariance of the ensemble, with the exact
/// moments for comparison.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub mean: Vec<Vect>,
    pub cov: Vec<Mat>,
    pub exact: MomentPath,
}

impl EnsembleStats {
    /// Standard error of the sample mean of component `i` at node `k`.
    pub fn mean_std_error(&self, k: usize, i: usize) -> f64 {
        (self.cov[k][(i, i)] / self.n_paths as f64).sqrt()
    }
}

/// Streams paths into node-wise statistics without storing them.
pub fn ensemble_stats(
    problem: &ValidatedProblem,
    law: &AffineControlLaw,
    law0: &InitialLaw,
    cfg: &SimConfig,
) -> Result<EnsembleStats, MonteCarloError> {
    cfg.validate()?;
    let (prep, exact) = prepare(problem, law, law0, &cfg.grid)?;
    let nodes = cfg.grid.len();
    let acc = chunked(
        cfg.n_paths,
        |range| {
            let mut acc = vec![Welford::new(prep.n); nodes];
            for i in range {
                prep.simulate(cfg, i, |k, x| acc[k].push(x))?;
            }
            Ok(acc)
        },
        |a, b| a.iter_mut().zip(&b).for_each(|(x, y)| x.merge(y)),
    )?
    .expect("n_paths >= 2");
    Ok(EnsembleStats {
        grid: cfg.grid,
        n_paths: cfg.n_paths,
        mean: acc.iter().map(|w| w.mean.clone()).collect(),
        cov: acc.iter().map(Welford::covariance).collect(),
        exact,
    })
}

/// Mean path cost and its standard error. With antithetic sampling each
/// pair average counts as one sample.
pub fn estimate_cost(
    problem: &ValidatedProblem,
    law: &AffineControlLaw,
    law0: &InitialLaw,
    cfg: &SimConfig,
) -> Result<CostEstimate, MonteCarloError> {
    cfg.validate()?;
    let (prep, _) = prepare(problem, law, law0, &cfg.grid)?;
    let per_sample = if cfg.antithetic { 2 } else { 1 };
    let n_samples = cfg.n_paths / per_sample;
    let acc = chunked(
        n_samples,
        |range| {
            let mut acc = Welford::new(1);
            for j in range {
                let mut total = 0.0;
                for i in j * per_sample..(j + 1) * per_sample {
                    total += prep.simulate(cfg, i, |_, _| {})?;
                }
                acc.push(&Vect::from_element(1, total / per_sample as f64));
            }
            Ok(acc)
        },
        |a, b| a.merge(&b),
    )?
    .expect("n_paths >= 2");
    let var = acc.covariance()[(0, 0)].max(0.0);
    Ok(CostEstimate { mean: acc.mean[0], std_error: (var / acc.count).sqrt(), n_paths: cfg.n_paths })
}

/// How costs along the direction are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostEvaluator {
    Exact,
    /// Monte Carlo with common random numbers across `λ`.
    MonteCarlo(SimConfig),
}

/// Least-squares fit `J(λ) ≈ c0 + c1 λ + c2 λ²` of the cost along a direction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadraticFit {
    pub lambdas: Vec<f64>,
    pub costs: Vec<f64>,
    pub constant: f64,
    pub linear: f64,
    pub quadratic: f64,
    /// max fit residual relative to `max(1, max |J|)`
    pub residual: f64,
    /// `J⁰(t, 0; ṽ)` evaluated directly, where `ṽ` is the control increment
    /// produced by the direction under the base feedback
    pub expected_quadratic: f64,
}

/// Evaluates `J` along `base + λ v` for an open-loop direction `v` and fits
/// a quadratic in `λ`.
///
/// Under the base feedback the direction perturbs the control process by
/// `λ ṽ` with `ṽ = K(X⁰ - E[X⁰]) + K̄E[X⁰] + v`, where `X⁰` starts from zero
/// in the homogeneous system; the quadratic coefficient is `J⁰(t, 0; ṽ)`.
pub fn quadratic_expansion_check(
    problem: &ValidatedProblem,
    base_law: &AffineControlLaw,
    direction: &AffineControlLaw,
    lambdas: &[f64],
    law0: &InitialLaw,
    evaluator: CostEvaluator,
) -> Result<QuadraticFit, MonteCarloError> {
    let mut distinct = lambdas.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 || lambdas.iter().any(|l| !l.is_finite()) {
        return Err(MonteCarloError::Config("need at least 3 distinct finite lambdas".into()));
    }
    let grid = problem.grid;
    for t in grid.nodes() {
        let (k, kb) = (direction.gain().eval(t)?, direction.mean_gain().eval(t)?);
        if k.iter().chain(kb.iter()).any(|v| *v != 0.0) {
            return Err(MonteCarloError::Config("direction must be an open-loop control".into()));
        }
    }
    let v = direction.offset_mean();
    let mut costs = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        let offset = base_law.offset_mean().plus(v.scaled_on(lam, &grid)?);
        let law = base_law.with_offset_mean(offset);
        let j = match evaluator {
            CostEvaluator::Exact => exact_cost(problem, &law, law0)?,
            CostEvaluator::MonteCarlo(cfg) => estimate_cost(problem, &law, law0, &cfg)?.mean,
        };
        costs.push(j);
    }
    let design = Mat::from_fn(lambdas.len(), 3, |i, j| lambdas[i].powi(j as i32));
    let y = Vect::from_column_slice(&costs);
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| MonteCarloError::Config(format!("least squares failed: {e}")))?;
    let fitted = &design * &coef;
    let scale = costs.iter().fold(1.0f64, |a, c| a.max(c.abs()));
    let residual = (fitted - &y).amax() / scale;

    let homogeneous = crate::problem::validate_problem(problem.homogeneous())?;
    let tilde = AffineControlLaw::new(base_law.gain().clone(), base_law.mean_gain().clone(), v.clone());
    let expected_quadratic = exact_cost(&homogeneous, &tilde, &InitialLaw::zero(problem.n))?;
    Ok(QuadraticFit {
        lambdas: lambdas.to_vec(),
        costs,
        constant: coef[0],
        linear: coef[1],
        quadratic: coef[2],
        residual,
        expected_quadratic,
    })
}

/// Constant open-loop direction `v ≡ value` in every control component.
pub fn constant_direction(n: usize, m: usize, value: f64) -> AffineControlLaw {
    AffineControlLaw::open_loop(MatrixFn::constant(Mat::from_element(m, 1, value)), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{validate_problem, ProblemSpec};

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(0.0, 1.0, n).unwrap()
    }

    #[test]
    fn zero_problem_has_zero_cost_and_error() {
        let prob = validate_problem(ProblemSpec::zeros(1, 1, grid(20))).unwrap();
        let est = estimate_cost(
            &prob,
            &AffineControlLaw::zero(1, 1),
            &InitialLaw::gaussian(Vect::zeros(1), Mat::identity(1, 1)).unwrap(),
            &SimConfig::new(100, 1, grid(20)),
        )
        .unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn noiseless_paths_follow_the_mean() {
        let mut spec = ProblemSpec::zeros(1, 1, grid(400));
        spec.a = MatrixFn::scalar(-1.0);
        spec.a_bar = MatrixFn::scalar(0.5);
        spec.b = MatrixFn::scalar(1.0);
        let prob = validate_problem(spec).unwrap();
        let law = AffineControlLaw::open_loop(MatrixFn::scalar(0.3), 1);
        let law0 = InitialLaw::deterministic(Vect::from_element(1, 2.0));
        let ens = simulate_paths(&prob, &law, &law0, &SimConfig::new(4, 9, grid(400))).unwrap();
        let exact = propagate_moments(&prob, &law, &law0).unwrap();
        for path in &ens.paths {
            for (x, m) in path.iter().zip(&exact.mean) {
                assert!((x[0] - m[0]).abs() < 5e-3);
            }
        }
    }

    #[test]
    fn bit_identical_across_thread_pools() {
        let mut spec = ProblemSpec::zeros(1, 1, grid(50));
        spec.diffusion = MatrixFn::scalar(1.0);
        spec.g = Mat::from_element(1, 1, 1.0);
        let prob = validate_problem(spec).unwrap();
        let law0 = InitialLaw::zero(1);
        let cfg = SimConfig::new(3000, 42, grid(50));
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_cost(&prob, &AffineControlLaw::zero(1, 1), &law0, &cfg).unwrap())
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        assert!(a.z_score(1.0) < 4.0);
    }

    #[test]
    fn path_is_independent_of_batch() {
        let mut spec = ProblemSpec::zeros(1, 1, grid(30));
        spec.diffusion = MatrixFn::scalar(1.0);
        let prob = validate_problem(spec).unwrap();
        let law0 = InitialLaw::gaussian(Vect::zeros(1), Mat::identity(1, 1)).unwrap();
        let law = AffineControlLaw::zero(1, 1);
        let small = simulate_paths(&prob, &law, &law0, &SimConfig::new(3, 5, grid(30))).unwrap();
        let large = simulate_paths(&prob, &law, &law0, &SimConfig::new(40, 5, grid(30))).unwrap();
        assert_eq!(small.paths[2], large.paths[2]);
    }

    #[test]
    fn antithetic_pairs_mirror() {
        let mut spec = ProblemSpec::zeros(1, 1, grid(30));
        spec.diffusion = MatrixFn::scalar(1.0);
        let prob = validate_problem(spec).unwrap();
        let law0 = InitialLaw::gaussian(Vect::zeros(1), Mat::identity(1, 1)).unwrap();
        let cfg = SimConfig::new(4, 5, grid(30)).antithetic(true);
        let ens = simulate_paths(&prob, &AffineControlLaw::zero(1, 1), &law0, &cfg).unwrap();
        for (a, b) in ens.paths[0].iter().zip(&ens.paths[1]) {
            assert_eq!(a[0], -b[0]);
        }
        assert!(SimConfig::new(3, 0, grid(3)).antithetic(true).validate().is_err());
    }

    #[test]
    fn quadratic_fit_on_zero_problem() {
        let mut spec = ProblemSpec::zeros(1, 1, grid(20));
        spec.r = MatrixFn::scalar(1.0);
        let prob = validate_problem(ProblemSpec::zeros(1, 1, grid(20))).unwrap();
        let fit = quadratic_expansion_check(
            &prob,
            &AffineControlLaw::zero(1, 1),
            &constant_direction(1, 1, 1.0),
            &[-1.0, 0.0, 1.0],
            &InitialLaw::zero(1),
            CostEvaluator::Exact,
        )
        .unwrap();
        assert_eq!((fit.constant, fit.linear, fit.quadratic), (0.0, 0.0, 0.0));
        let prob = validate_problem(spec).unwrap();
        assert!(quadratic_expansion_check(
            &prob,
            &AffineControlLaw::zero(1, 1),
            &constant_direction(1, 1, 1.0),
            &[1.0, 1.0, 0.0],
            &InitialLaw::zero(1),
            CostEvaluator::Exact,
        )
        .is_err());
    }
}
