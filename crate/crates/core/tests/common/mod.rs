#![allow(dead_code)]

use std::path::PathBuf;

use mflq::config::{load_config, LoadedConfig};
use mflq::linalg::Mat;
use mflq::problem::{validate_problem, MatrixFn, ProblemSpec, TimeGrid, ValidatedProblem};
use mflq::riccati::check_standard_condition;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ALPHA: f64 = 0.05;
pub const SCHEDULE: [f64; 5] = [1.0, 0.3, 0.1, 0.03, 0.01];

pub fn config(name: &str) -> LoadedConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// `P` of the indefinite-weight example.
pub fn p61(s: f64) -> f64 {
    2.0 * (s + 1.0) * (s + 1.0)
}

/// `Π` of the indefinite-weight example.
pub fn pi61(s: f64) -> f64 {
    let e = (2.0 * (1.0 - s)).exp();
    ALPHA * e / (2.0 * ALPHA * (e - 1.0) - 1.0)
}

/// `Π_ε` of the regularised singular example on `[0, 1]`.
pub fn pi62(eps: f64, s: f64) -> f64 {
    3.0 * eps / (eps + 3.0 * (1.0 - s))
}

pub fn max_node_error(grid: &TimeGrid, values: &[Mat], exact: impl Fn(f64) -> f64) -> f64 {
    grid.nodes().iter().zip(values).map(|(&s, v)| (v[(0, 0)] - exact(s)).abs()).fold(0.0, f64::max)
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

pub struct Uniform(pub ChaCha8Rng);

impl Uniform {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * ((self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }

    pub fn matrix(&mut self, r: usize, c: usize, scale: f64) -> Mat {
        Mat::from_fn(r, c, |_, _| self.next(-scale, scale))
    }

    pub fn psd(&mut self, n: usize, scale: f64) -> Mat {
        let l = self.matrix(n, n, scale);
        &l * l.transpose()
    }
}

/// Random problem with `n, m ≤ 3` satisfying the standard sufficient
/// condition (`S = 0`, `R ≥ I`, PSD `Q` and `G`).
pub fn random_standard_spec(rng: &mut Uniform, n_steps: usize) -> ValidatedProblem {
    let n = 1 + rng.below(3);
    let m = 1 + rng.below(3);
    let mut spec = ProblemSpec::zeros(n, m, TimeGrid::new(0.0, 1.0, n_steps).unwrap());
    let c = MatrixFn::constant;
    spec.a = c(rng.matrix(n, n, 1.0));
    spec.a_bar = c(rng.matrix(n, n, 0.5));
    spec.b = c(rng.matrix(n, m, 1.0));
    spec.b_bar = c(rng.matrix(n, m, 0.5));
    spec.c = c(rng.matrix(n, n, 0.5));
    spec.c_bar = c(rng.matrix(n, n, 0.3));
    spec.d = c(rng.matrix(n, m, 0.5));
    spec.d_bar = c(rng.matrix(n, m, 0.3));
    spec.q = c(rng.psd(n, 1.0));
    spec.q_bar = c(rng.psd(n, 0.5));
    spec.r = c(Mat::identity(m, m) + rng.psd(m, 0.5));
    spec.r_bar = c(rng.psd(m, 0.5));
    spec.g = rng.psd(n, 1.0);
    spec.g_bar = rng.psd(n, 0.5);
    let prob = validate_problem(spec).unwrap();
    assert!(check_standard_condition(&prob).unwrap().holds);
    prob
}

/// Adds random inhomogeneous drivers to a problem.
pub fn with_random_drivers(rng: &mut Uniform, prob: &ValidatedProblem) -> ValidatedProblem {
    let (n, m) = (prob.n, prob.m);
    let mut spec = prob.spec().clone();
    let c = MatrixFn::constant;
    spec.drift = c(rng.matrix(n, 1, 0.5));
    spec.diffusion = c(rng.matrix(n, 1, 0.5));
    spec.q_lin = c(rng.matrix(n, 1, 0.5));
    spec.q_bar_lin = c(rng.matrix(n, 1, 0.5));
    spec.rho = c(rng.matrix(m, 1, 0.5));
    spec.rho_bar = c(rng.matrix(m, 1, 0.5));
    spec.g_lin = rng.matrix(n, 1, 0.5).column(0).into();
    spec.g_bar_lin = rng.matrix(n, 1, 0.5).column(0).into();
    validate_problem(spec).unwrap()
}

/// Random smooth deterministic control as an expression per entry.
pub fn random_control(rng: &mut Uniform, m: usize) -> MatrixFn {
    let rows: Vec<Vec<String>> = (0..m)
        .map(|_| {
            let (a, b, c, d) = (rng.next(-2.0, 2.0), rng.next(-2.0, 2.0), rng.next(-1.0, 1.0), rng.next(-2.0, 2.0));
            vec![format!("{a} + {b}*s + {c}*exp({d}*s)")]
        })
        .collect();
    let refs: Vec<Vec<&str>> = rows.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
    let slices: Vec<&[&str]> = refs.iter().map(Vec::as_slice).collect();
    MatrixFn::from_exprs(&slices).unwrap()
}
