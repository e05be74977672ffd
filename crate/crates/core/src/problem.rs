//! Problem data: horizon grids, time-dependent coefficient functions, the
//! full mean-field LQ problem, initial laws and affine control laws.

use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::linalg::{asymmetry, is_finite, min_eigenvalue, symmetrize, Mat, Vect};

pub const DEFAULT_SYM_TOL: f64 = 1e-10;
pub const DEFAULT_PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),
    #[error("`{name}` has shape {found:?}, expected {expected:?}")]
    Shape { name: String, expected: (usize, usize), found: (usize, usize) },
    #[error("`{name}` is not symmetric (asymmetry {asymmetry:e} at s = {time})")]
    Asymmetric { name: String, asymmetry: f64, time: f64 },
    #[error("`{name}`: {source}")]
    Expression { name: String, source: ExprError },
    #[error("time {s} lies outside [{t0}, {t_end}]")]
    OutOfHorizon { s: f64, t0: f64, t_end: f64 },
    #[error("non-finite value of `{name}` at s = {s}")]
    NonFinite { name: String, s: f64 },
    #[error("invalid initial law: {0}")]
    InitialLaw(String),
    #[error("invalid control law: {0}")]
    ControlLaw(String),
}

/// Uniform grid `s_k = t0 + k (T - t0) / n_steps` with `s_{n_steps} = T` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, n_steps: usize) -> Result<Self, ProblemError> {
        if !(t0.is_finite() && t_end.is_finite()) || t0 >= t_end {
            return Err(ProblemError::DegenerateGrid(format!("need t0 < T, got [{t0}, {t_end}]")));
        }
        if n_steps == 0 {
            return Err(ProblemError::DegenerateGrid("n_steps must be positive".into()));
        }
        Ok(Self { t0, t_end, n_steps })
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t0) / self.n_steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k >= self.n_steps {
            self.t_end
        } else {
            self.t0 + (self.t_end - self.t0) * (k as f64 / self.n_steps as f64)
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.node(k)).collect()
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The grid with every interval halved; node `2k` coincides with node `k`.
    pub fn refined(&self) -> TimeGrid {
        TimeGrid { n_steps: 2 * self.n_steps, ..*self }
    }

    pub fn with_steps(&self, n_steps: usize) -> Result<TimeGrid, ProblemError> {
        TimeGrid::new(self.t0, self.t_end, n_steps)
    }

    pub fn contains(&self, s: f64) -> bool {
        let slack = 1e-9 * (self.t_end - self.t0);
        s >= self.t0 - slack && s <= self.t_end + slack
    }

    /// Interval index `k` and fraction `theta` with `s = s_k + theta h`.
    pub fn locate(&self, s: f64) -> (usize, f64) {
        let x = ((s - self.t0) / self.step()).clamp(0.0, self.n_steps as f64);
        let k = (x.floor() as usize).min(self.n_steps - 1);
        (k, x - k as f64)
    }
}

/// Index into a half-step table for RK4 stage `stage` (0 start, 1 mid, 2 end)
/// of the step over interval `k`.
pub fn stage_index(k: usize, stage: usize, backward: bool) -> usize {
    if backward {
        2 * k + 2 - stage
    } else {
        2 * k + stage
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interp {
    PiecewiseConstantLeft,
    PiecewiseLinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledFn {
    times: Vec<f64>,
    values: Vec<Mat>,
    interp: Interp,
}

impl SampledFn {
    pub fn new(times: Vec<f64>, values: Vec<Mat>, interp: Interp) -> Result<Self, ProblemError> {
        if times.is_empty() || times.len() != values.len() {
            return Err(ProblemError::DegenerateGrid("sample times and values differ in length".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ProblemError::DegenerateGrid("sample times must increase strictly".into()));
        }
        let shape = values[0].shape();
        if let Some(bad) = values.iter().find(|v| v.shape() != shape) {
            return Err(ProblemError::Shape {
                name: "samples".into(),
                expected: shape,
                found: bad.shape(),
            });
        }
        Ok(Self { times, values, interp })
    }

    pub fn on_grid(grid: &TimeGrid, values: Vec<Mat>, interp: Interp) -> Result<Self, ProblemError> {
        Self::new(grid.nodes(), values, interp)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    fn eval(&self, s: f64) -> Result<Mat, ProblemError> {
        let (first, last) = (self.times[0], *self.times.last().unwrap());
        let slack = 1e-9 * (last - first).max(1e-300);
        if s < first - slack || s > last + slack {
            return Err(ProblemError::OutOfHorizon { s, t0: first, t_end: last });
        }
        if self.times.len() == 1 {
            return Ok(self.values[0].clone());
        }
        // index of the last sample time <= s
        let j = self.times.partition_point(|&t| t <= s).saturating_sub(1).min(self.times.len() - 1);
        if self.times[j] == s || j == self.times.len() - 1 {
            return Ok(self.values[j].clone());
        }
        match self.interp {
            Interp::PiecewiseConstantLeft => Ok(self.values[j].clone()),
            Interp::PiecewiseLinear => {
                let w = (s - self.times[j]) / (self.times[j + 1] - self.times[j]);
                Ok(&self.values[j] * (1.0 - w) + &self.values[j + 1] * w)
            }
        }
    }
}

/// A matrix-valued function of time.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixFn {
    Constant(Mat),
    /// Row-major entry expressions in `s`.
    Expr { rows: usize, cols: usize, entries: Vec<Expr> },
    Sampled(SampledFn),
    /// `(F + Fᵀ) / 2`
    Symmetric(Box<MatrixFn>),
    /// `F + shift * I`
    Shifted { base: Box<MatrixFn>, shift: f64 },
    Sum(Vec<MatrixFn>),
}

impl MatrixFn {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        MatrixFn::Constant(Mat::zeros(rows, cols))
    }

    pub fn constant(m: Mat) -> Self {
        MatrixFn::Constant(m)
    }

    pub fn scalar(v: f64) -> Self {
        MatrixFn::Constant(Mat::from_element(1, 1, v))
    }

    /// Parses a row-major grid of entry expressions.
    pub fn from_exprs(rows: &[&[&str]]) -> Result<Self, ExprError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut entries = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(ExprError::Syntax { offset: 0, message: "ragged matrix rows".into() });
            }
            for text in row.iter() {
                entries.push(Expr::parse(text)?);
            }
        }
        Ok(MatrixFn::Expr { rows: n_rows, cols: n_cols, entries })
    }

    /// A 1×1 function from a single expression.
    pub fn scalar_expr(text: &str) -> Result<Self, ExprError> {
        Self::from_exprs(&[&[text]])
    }

    pub fn shape(&self) -> Option<(usize, usize)> {
        match self {
            MatrixFn::Constant(m) => Some(m.shape()),
            MatrixFn::Expr { rows, cols, .. } => Some((*rows, *cols)),
            MatrixFn::Sampled(f) => Some(f.values[0].shape()),
            MatrixFn::Symmetric(f) | MatrixFn::Shifted { base: f, .. } => f.shape(),
            MatrixFn::Sum(fs) => fs.first().and_then(|f| f.shape()),
        }
    }

    /// Entry-wise evaluation at time `s`.
    pub fn eval(&self, s: f64) -> Result<Mat, ProblemError> {
        let m = match self {
            MatrixFn::Constant(m) => m.clone(),
            MatrixFn::Expr { rows, cols, entries } => {
                let mut out = Mat::zeros(*rows, *cols);
                for (idx, e) in entries.iter().enumerate() {
                    out[(idx / cols, idx % cols)] = e
                        .eval(s)
                        .map_err(|source| ProblemError::Expression { name: format!("entry {idx}"), source })?;
                }
                out
            }
            MatrixFn::Sampled(f) => f.eval(s)?,
            MatrixFn::Symmetric(f) => symmetrize(&f.eval(s)?),
            MatrixFn::Shifted { base, shift } => {
                let mut m = base.eval(s)?;
                for i in 0..m.nrows().min(m.ncols()) {
                    m[(i, i)] += shift;
                }
                m
            }
            MatrixFn::Sum(fs) => {
                let mut it = fs.iter();
                let mut acc = it
                    .next()
                    .ok_or_else(|| ProblemError::ControlLaw("empty sum".into()))?
                    .eval(s)?;
                for f in it {
                    let term = f.eval(s)?;
                    if term.shape() != acc.shape() {
                        return Err(ProblemError::Shape {
                            name: "sum term".into(),
                            expected: acc.shape(),
                            found: term.shape(),
                        });
                    }
                    acc += term;
                }
                acc
            }
        };
        if !is_finite(&m) {
            return Err(ProblemError::NonFinite { name: "matrix function".into(), s });
        }
        Ok(m)
    }

    /// `self + shift * I`, folding repeated shifts into one.
    pub fn shifted(&self, shift: f64) -> MatrixFn {
        match self {
            MatrixFn::Shifted { base, shift: s0 } => MatrixFn::Shifted { base: base.clone(), shift: s0 + shift },
            other => MatrixFn::Shifted { base: Box::new(other.clone()), shift },
        }
    }

    pub fn plus(&self, other: MatrixFn) -> MatrixFn {
        match self {
            MatrixFn::Sum(fs) => {
                let mut fs = fs.clone();
                fs.push(other);
                MatrixFn::Sum(fs)
            }
            f => MatrixFn::Sum(vec![f.clone(), other]),
        }
    }

    /// `scale * self`, sampled on `grid` (nodes and midpoints) with linear interpolation.
    pub fn scaled_on(&self, scale: f64, grid: &TimeGrid) -> Result<MatrixFn, ProblemError> {
        let fine = grid.refined();
        let values = fine.nodes().iter().map(|&t| Ok(self.eval(t)? * scale)).collect::<Result<Vec<_>, _>>()?;
        Ok(MatrixFn::Sampled(SampledFn::on_grid(&fine, values, Interp::PiecewiseLinear)?))
    }
}

/// Evaluates `f` at `s`, checking that `s` lies in the horizon. Times within
/// a relative 1e-9 slack of the ends are clamped onto the horizon.
pub fn eval_matrix(f: &MatrixFn, grid: &TimeGrid, s: f64) -> Result<Mat, ProblemError> {
    if !grid.contains(s) {
        return Err(ProblemError::OutOfHorizon { s, t0: grid.t0, t_end: grid.t_end });
    }
    f.eval(s.clamp(grid.t0, grid.t_end))
}

/// Samples of `f` at every node and midpoint of `grid`.
pub fn sample_refined(f: &MatrixFn, grid: &TimeGrid) -> Result<Vec<Mat>, ProblemError> {
    grid.refined().nodes().into_iter().map(|t| eval_matrix(f, grid, t)).collect()
}

/// All data of a mean-field LQ problem on `[grid.t0, grid.t_end]`.
///
/// State equation
/// `dX = (A X + Ā E[X] + B u + B̄ E[u] + b) ds + (C X + C̄ E[X] + D u + D̄ E[u] + σ) dW`,
/// with quadratic weights `Q, Q̄, S, S̄, R, R̄`, terminal weights `G, Ḡ`,
/// and linear terms `q, q̄, ρ, ρ̄, g, ḡ`. The inhomogeneous terms are
/// deterministic functions of time.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub n: usize,
    pub m: usize,
    pub grid: TimeGrid,
    pub a: MatrixFn,
    pub a_bar: MatrixFn,
    pub b: MatrixFn,
    pub b_bar: MatrixFn,
    pub c: MatrixFn,
    pub c_bar: MatrixFn,
    pub d: MatrixFn,
    pub d_bar: MatrixFn,
    pub q: MatrixFn,
    pub q_bar: MatrixFn,
    pub s: MatrixFn,
    pub s_bar: MatrixFn,
    pub r: MatrixFn,
    pub r_bar: MatrixFn,
    /// terminal weights `G`, `Ḡ`
    pub g: Mat,
    pub g_bar: Mat,
    /// drift offset `b` (n×1)
    pub drift: MatrixFn,
    /// diffusion offset `σ` (n×1)
    pub diffusion: MatrixFn,
    pub q_lin: MatrixFn,
    pub q_bar_lin: MatrixFn,
    pub rho: MatrixFn,
    pub rho_bar: MatrixFn,
    pub g_lin: Vect,
    pub g_bar_lin: Vect,
}

impl ProblemSpec {
    /// The all-zero problem of the given dimensions.
    pub fn zeros(n: usize, m: usize, grid: TimeGrid) -> Self {
        let z = MatrixFn::zeros;
        Self {
            n,
            m,
            grid,
            a: z(n, n),
            a_bar: z(n, n),
            b: z(n, m),
            b_bar: z(n, m),
            c: z(n, n),
            c_bar: z(n, n),
            d: z(n, m),
            d_bar: z(n, m),
            q: z(n, n),
            q_bar: z(n, n),
            s: z(m, n),
            s_bar: z(m, n),
            r: z(m, m),
            r_bar: z(m, m),
            g: Mat::zeros(n, n),
            g_bar: Mat::zeros(n, n),
            drift: z(n, 1),
            diffusion: z(n, 1),
            q_lin: z(n, 1),
            q_bar_lin: z(n, 1),
            rho: z(m, 1),
            rho_bar: z(m, 1),
            g_lin: Vect::zeros(n),
            g_bar_lin: Vect::zeros(n),
        }
    }

    /// The same problem with every inhomogeneous term set to zero.
    pub fn homogeneous(&self) -> Self {
        let (n, m) = (self.n, self.m);
        Self {
            drift: MatrixFn::zeros(n, 1),
            diffusion: MatrixFn::zeros(n, 1),
            q_lin: MatrixFn::zeros(n, 1),
            q_bar_lin: MatrixFn::zeros(n, 1),
            rho: MatrixFn::zeros(m, 1),
            rho_bar: MatrixFn::zeros(m, 1),
            g_lin: Vect::zeros(n),
            g_bar_lin: Vect::zeros(n),
            ..self.clone()
        }
    }

    fn named_fns(&self) -> [(&'static str, &MatrixFn, (usize, usize)); 20] {
        let (n, m) = (self.n, self.m);
        [
            ("A", &self.a, (n, n)),
            ("Abar", &self.a_bar, (n, n)),
            ("B", &self.b, (n, m)),
            ("Bbar", &self.b_bar, (n, m)),
            ("C", &self.c, (n, n)),
            ("Cbar", &self.c_bar, (n, n)),
            ("D", &self.d, (n, m)),
            ("Dbar", &self.d_bar, (n, m)),
            ("Q", &self.q, (n, n)),
            ("Qbar", &self.q_bar, (n, n)),
            ("S", &self.s, (m, n)),
            ("Sbar", &self.s_bar, (m, n)),
            ("R", &self.r, (m, m)),
            ("Rbar", &self.r_bar, (m, m)),
            ("b", &self.drift, (n, 1)),
            ("sigma", &self.diffusion, (n, 1)),
            ("q", &self.q_lin, (n, 1)),
            ("qbar", &self.q_bar_lin, (n, 1)),
            ("rho", &self.rho, (m, 1)),
            ("rhobar", &self.rho_bar, (m, 1)),
        ]
    }

    /// All coefficients evaluated at time `t`.
    pub fn coefficients_at(&self, t: f64) -> Result<Coefficients, ProblemError> {
        if !self.grid.contains(t) {
            return Err(ProblemError::OutOfHorizon { s: t, t0: self.grid.t0, t_end: self.grid.t_end });
        }
        let t = t.clamp(self.grid.t0, self.grid.t_end);
        let ev = |name: &str, f: &MatrixFn| -> Result<Mat, ProblemError> {
            f.eval(t).map_err(|e| match e {
                ProblemError::NonFinite { s, .. } => ProblemError::NonFinite { name: name.into(), s },
                ProblemError::Expression { source, .. } => ProblemError::Expression { name: name.into(), source },
                other => other,
            })
        };
        Ok(Coefficients {
            time: t,
            a: ev("A", &self.a)?,
            a_bar: ev("Abar", &self.a_bar)?,
            b: ev("B", &self.b)?,
            b_bar: ev("Bbar", &self.b_bar)?,
            c: ev("C", &self.c)?,
            c_bar: ev("Cbar", &self.c_bar)?,
            d: ev("D", &self.d)?,
            d_bar: ev("Dbar", &self.d_bar)?,
            q: ev("Q", &self.q)?,
            q_bar: ev("Qbar", &self.q_bar)?,
            s: ev("S", &self.s)?,
            s_bar: ev("Sbar", &self.s_bar)?,
            r: ev("R", &self.r)?,
            r_bar: ev("Rbar", &self.r_bar)?,
            drift: ev("b", &self.drift)?,
            diffusion: ev("sigma", &self.diffusion)?,
            q_lin: ev("q", &self.q_lin)?,
            q_bar_lin: ev("qbar", &self.q_bar_lin)?,
            rho: ev("rho", &self.rho)?,
            rho_bar: ev("rhobar", &self.rho_bar)?,
        })
    }

    /// Coefficients at every node and midpoint of `grid` (index `2k` is
    /// node `k`, index `2k + 1` the midpoint of interval `k`).
    pub fn tabulate(&self, grid: &TimeGrid) -> Result<Vec<Coefficients>, ProblemError> {
        grid.refined().nodes().into_iter().map(|t| self.coefficients_at(t)).collect()
    }

    /// True when every inhomogeneous term vanishes on the grid nodes.
    pub fn is_homogeneous(&self) -> Result<bool, ProblemError> {
        if self.g_lin.iter().any(|v| *v != 0.0) || self.g_bar_lin.iter().any(|v| *v != 0.0) {
            return Ok(false);
        }
        for t in self.grid.nodes() {
            let c = self.coefficients_at(t)?;
            for v in [&c.drift, &c.diffusion, &c.q_lin, &c.q_bar_lin, &c.rho, &c.rho_bar] {
                if v.iter().any(|x| *x != 0.0) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Coefficient values at one time.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub time: f64,
    pub a: Mat,
    pub a_bar: Mat,
    pub b: Mat,
    pub b_bar: Mat,
    pub c: Mat,
    pub c_bar: Mat,
    pub d: Mat,
    pub d_bar: Mat,
    pub q: Mat,
    pub q_bar: Mat,
    pub s: Mat,
    pub s_bar: Mat,
    pub r: Mat,
    pub r_bar: Mat,
    pub drift: Mat,
    pub diffusion: Mat,
    pub q_lin: Mat,
    pub q_bar_lin: Mat,
    pub rho: Mat,
    pub rho_bar: Mat,
}

impl Coefficients {
    pub fn a_sum(&self) -> Mat {
        &self.a + &self.a_bar
    }
    pub fn b_sum(&self) -> Mat {
        &self.b + &self.b_bar
    }
    pub fn c_sum(&self) -> Mat {
        &self.c + &self.c_bar
    }
    pub fn d_sum(&self) -> Mat {
        &self.d + &self.d_bar
    }
    pub fn q_sum(&self) -> Mat {
        &self.q + &self.q_bar
    }
    pub fn s_sum(&self) -> Mat {
        &self.s + &self.s_bar
    }
    pub fn r_sum(&self) -> Mat {
        &self.r + &self.r_bar
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub sym_tol: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { sym_tol: DEFAULT_SYM_TOL }
    }
}

/// A problem whose shapes, evaluability and symmetry have been checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedProblem(ProblemSpec);

impl ValidatedProblem {
    pub fn spec(&self) -> &ProblemSpec {
        &self.0
    }

    pub fn into_inner(self) -> ProblemSpec {
        self.0
    }

    /// Validates again; a validated problem is returned unchanged.
    pub fn revalidate(self) -> Result<ValidatedProblem, ProblemError> {
        validate_problem(self.0)
    }

    /// Copy with a different horizon grid.
    pub fn with_grid(&self, grid: TimeGrid) -> Result<ValidatedProblem, ProblemError> {
        validate_problem(ProblemSpec { grid, ..self.0.clone() })
    }
}

impl Deref for ValidatedProblem {
    type Target = ProblemSpec;
    fn deref(&self) -> &ProblemSpec {
        &self.0
    }
}

pub fn validate_problem(spec: ProblemSpec) -> Result<ValidatedProblem, ProblemError> {
    validate_problem_with(spec, ValidationOptions::default())
}

fn relative_asymmetry(m: &Mat) -> f64 {
    asymmetry(m) / m.norm().max(1.0)
}

pub fn validate_problem_with(mut spec: ProblemSpec, opts: ValidationOptions) -> Result<ValidatedProblem, ProblemError> {
    if spec.n == 0 || spec.m == 0 {
        return Err(ProblemError::DegenerateGrid("dimensions must be positive".into()));
    }
    let grid = TimeGrid::new(spec.grid.t0, spec.grid.t_end, spec.grid.n_steps)?;
    let n = spec.n;

    for (name, mat, expected) in [
        ("G", &spec.g, (n, n)),
        ("Gbar", &spec.g_bar, (n, n)),
    ] {
        if mat.shape() != expected {
            return Err(ProblemError::Shape { name: name.into(), expected, found: mat.shape() });
        }
        if !is_finite(mat) {
            return Err(ProblemError::NonFinite { name: name.into(), s: grid.t_end });
        }
        let asym = relative_asymmetry(mat);
        if asym > opts.sym_tol {
            return Err(ProblemError::Asymmetric { name: name.into(), asymmetry: asym, time: grid.t_end });
        }
    }
    for (name, v) in [("g", &spec.g_lin), ("gbar", &spec.g_bar_lin)] {
        if v.len() != n {
            return Err(ProblemError::Shape { name: name.into(), expected: (n, 1), found: (v.len(), 1) });
        }
    }

    for (name, f, expected) in spec.named_fns() {
        if let Some(shape) = f.shape() {
            if shape != expected {
                return Err(ProblemError::Shape { name: name.into(), expected, found: shape });
            }
        }
    }
    for t in grid.nodes() {
        for (name, f, expected) in spec.named_fns() {
            let v = f.eval(t).map_err(|e| match e {
                ProblemError::Expression { source, .. } => ProblemError::Expression { name: name.into(), source },
                ProblemError::NonFinite { s, .. } => ProblemError::NonFinite { name: name.into(), s },
                other => other,
            })?;
            if v.shape() != expected {
                return Err(ProblemError::Shape { name: name.into(), expected, found: v.shape() });
            }
            if matches!(name, "Q" | "Qbar" | "R" | "Rbar") {
                let asym = relative_asymmetry(&v);
                if asym > opts.sym_tol {
                    return Err(ProblemError::Asymmetric { name: name.into(), asymmetry: asym, time: t });
                }
            }
        }
    }

    spec.grid = grid;
    spec.g = symmetrize(&spec.g);
    spec.g_bar = symmetrize(&spec.g_bar);
    for f in [&mut spec.q, &mut spec.q_bar, &mut spec.r, &mut spec.r_bar] {
        *f = symmetrized_fn(f);
    }
    Ok(ValidatedProblem(spec))
}

fn symmetrized_fn(f: &MatrixFn) -> MatrixFn {
    match f {
        MatrixFn::Constant(m) => MatrixFn::Constant(symmetrize(m)),
        MatrixFn::Symmetric(_) => f.clone(),
        MatrixFn::Shifted { base, shift } => MatrixFn::Shifted { base: Box::new(symmetrized_fn(base)), shift: *shift },
        MatrixFn::Expr { rows: 1, cols: 1, .. } => f.clone(),
        other => MatrixFn::Symmetric(Box::new(other.clone())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Gaussian,
    Deterministic,
}

/// Law of the initial state: only its mean and covariance matter for values
/// and moments; `kind` selects how Monte-Carlo draws it.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialLaw {
    pub mean: Vect,
    pub cov: Mat,
    pub kind: SamplerKind,
}

impl InitialLaw {
    pub fn deterministic(mean: Vect) -> Self {
        let n = mean.len();
        Self { mean, cov: Mat::zeros(n, n), kind: SamplerKind::Deterministic }
    }

    pub fn gaussian(mean: Vect, cov: Mat) -> Result<Self, ProblemError> {
        let law = Self { mean, cov, kind: SamplerKind::Gaussian };
        law.validate(law.mean.len())?;
        Ok(law)
    }

    pub fn zero(n: usize) -> Self {
        Self::deterministic(Vect::zeros(n))
    }

    pub fn validate(&self, n: usize) -> Result<(), ProblemError> {
        if self.mean.len() != n || self.cov.shape() != (n, n) {
            return Err(ProblemError::InitialLaw(format!("expected dimension {n}")));
        }
        if !self.mean.iter().chain(self.cov.iter()).all(|v| v.is_finite()) {
            return Err(ProblemError::InitialLaw("non-finite entries".into()));
        }
        if relative_asymmetry(&self.cov) > DEFAULT_SYM_TOL {
            return Err(ProblemError::InitialLaw("covariance is not symmetric".into()));
        }
        if min_eigenvalue(&self.cov) < -DEFAULT_PSD_TOL {
            return Err(ProblemError::InitialLaw("covariance is not positive semidefinite".into()));
        }
        if self.kind == SamplerKind::Deterministic && self.cov.iter().any(|v| *v != 0.0) {
            return Err(ProblemError::InitialLaw("deterministic law must have zero covariance".into()));
        }
        Ok(())
    }
}

/// `u = K (X - E[X]) + K̄ E[X] + k_dev + k_mean`.
///
/// `k_dev` is the centred random offset; with deterministic problem data it
/// is identically zero and is fixed to zero by every constructor.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineControlLaw {
    gain: MatrixFn,
    mean_gain: MatrixFn,
    offset_dev: MatrixFn,
    offset_mean: MatrixFn,
}

impl AffineControlLaw {
    pub fn new(gain: MatrixFn, mean_gain: MatrixFn, offset_mean: MatrixFn) -> Self {
        let m = offset_mean.shape().map_or(0, |s| s.0);
        Self { gain, mean_gain, offset_dev: MatrixFn::zeros(m, 1), offset_mean }
    }

    pub fn zero(n: usize, m: usize) -> Self {
        Self::new(MatrixFn::zeros(m, n), MatrixFn::zeros(m, n), MatrixFn::zeros(m, 1))
    }

    /// Deterministic open-loop control `u(s) = v(s)`.
    pub fn open_loop(v: MatrixFn, n: usize) -> Self {
        let m = v.shape().map_or(0, |s| s.0);
        Self::new(MatrixFn::zeros(m, n), MatrixFn::zeros(m, n), v)
    }

    pub fn gain(&self) -> &MatrixFn {
        &self.gain
    }
    pub fn mean_gain(&self) -> &MatrixFn {
        &self.mean_gain
    }
    pub fn offset_dev(&self) -> &MatrixFn {
        &self.offset_dev
    }
    pub fn offset_mean(&self) -> &MatrixFn {
        &self.offset_mean
    }

    pub fn with_offset_mean(&self, offset_mean: MatrixFn) -> Self {
        Self { offset_mean, ..self.clone() }
    }

    pub fn validate(&self, n: usize, m: usize, grid: &TimeGrid) -> Result<(), ProblemError> {
        for (name, f, expected) in [
            ("K", &self.gain, (m, n)),
            ("Kbar", &self.mean_gain, (m, n)),
            ("k_dev", &self.offset_dev, (m, 1)),
            ("k_mean", &self.offset_mean, (m, 1)),
        ] {
            for t in grid.nodes() {
                let v = eval_matrix(f, grid, t)
                    .map_err(|e| ProblemError::ControlLaw(format!("`{name}` at s = {t}: {e}")))?;
                if v.shape() != expected {
                    return Err(ProblemError::Shape { name: name.into(), expected, found: v.shape() });
                }
            }
        }
        Ok(())
    }

    /// `(K, K̄, k_mean)` at every node and midpoint of `grid`.
    pub fn tabulate(&self, grid: &TimeGrid) -> Result<Vec<LawValues>, ProblemError> {
        grid.refined()
            .nodes()
            .into_iter()
            .map(|t| {
                Ok(LawValues {
                    gain: eval_matrix(&self.gain, grid, t)?,
                    mean_gain: eval_matrix(&self.mean_gain, grid, t)?,
                    offset: eval_matrix(&self.offset_mean, grid, t)?,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LawValues {
    pub gain: Mat,
    pub mean_gain: Mat,
    pub offset: Mat,
}

impl LawValues {
    /// Mean control `K̄ m + k_mean`.
    pub fn mean_control(&self, mean: &Mat) -> Mat {
        &self.mean_gain * mean + &self.offset
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> TimeGrid {
        TimeGrid::new(0.0, 1.0, 10).unwrap()
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = TimeGrid::new(0.1, 0.7, 7).unwrap();
        assert_eq!(g.node(0), 0.1);
        assert_eq!(g.node(7), 0.7);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        assert!(TimeGrid::new(1.0, 1.0, 3).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn indefinite_r_at_zero() {
        let r = MatrixFn::scalar_expr("(s+1)^3-4*(s+1)^2").unwrap();
        assert_eq!(eval_matrix(&r, &grid(), 0.0).unwrap()[(0, 0)], -3.0);
        assert!(eval_matrix(&r, &grid(), 1.5).is_err());
    }

    #[test]
    fn zero_fn_and_sampled_identity() {
        assert_eq!(MatrixFn::zeros(2, 3).eval(0.3).unwrap(), Mat::zeros(2, 3));
        let f = MatrixFn::Sampled(
            SampledFn::new(vec![0.0, 1.0], vec![Mat::identity(2, 2); 2], Interp::PiecewiseLinear).unwrap(),
        );
        assert_eq!(f.eval(0.5).unwrap(), Mat::identity(2, 2));
        assert!(f.eval(1.2).is_err());
    }

    #[test]
    fn piecewise_constant_left_holds_value() {
        let f = SampledFn::new(
            vec![0.0, 0.5, 1.0],
            vec![Mat::from_element(1, 1, 1.0), Mat::from_element(1, 1, 2.0), Mat::from_element(1, 1, 3.0)],
            Interp::PiecewiseConstantLeft,
        )
        .unwrap();
        let f = MatrixFn::Sampled(f);
        assert_eq!(f.eval(0.49).unwrap()[(0, 0)], 1.0);
        assert_eq!(f.eval(0.5).unwrap()[(0, 0)], 2.0);
        assert_eq!(f.eval(1.0).unwrap()[(0, 0)], 3.0);
    }

    #[test]
    fn asymmetric_terminal_weight_rejected() {
        let mut spec = ProblemSpec::zeros(2, 1, grid());
        spec.g = Mat::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(validate_problem(spec), Err(ProblemError::Asymmetric { .. })));
    }

    #[test]
    fn asymmetric_running_weight_rejected() {
        let mut spec = ProblemSpec::zeros(2, 1, grid());
        spec.q = MatrixFn::from_exprs(&[&["1", "s"], &["0", "1"]]).unwrap();
        // symmetric at s = 0 only
        assert!(matches!(validate_problem(spec), Err(ProblemError::Asymmetric { .. })));
    }

    #[test]
    fn tiny_asymmetry_is_symmetrized() {
        let mut spec = ProblemSpec::zeros(2, 1, grid());
        spec.g = Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-12, 1.0]);
        let v = validate_problem(spec).unwrap();
        assert_eq!(v.g, v.g.transpose());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut spec = ProblemSpec::zeros(2, 1, grid());
        spec.b = MatrixFn::zeros(2, 2);
        assert!(matches!(validate_problem(spec), Err(ProblemError::Shape { .. })));
    }

    #[test]
    fn bad_expression_rejected() {
        let mut spec = ProblemSpec::zeros(1, 1, grid());
        spec.r = MatrixFn::scalar_expr("1/(s-0.5)").unwrap();
        assert!(matches!(validate_problem(spec), Err(ProblemError::Expression { .. })));
    }

    #[test]
    fn zero_problem_with_unit_r_is_valid() {
        let mut spec = ProblemSpec::zeros(1, 1, grid());
        spec.r = MatrixFn::scalar(1.0);
        assert!(validate_problem(spec).is_ok());
    }

    #[test]
    fn validation_is_idempotent() {
        let mut spec = ProblemSpec::zeros(2, 2, grid());
        spec.q = MatrixFn::from_exprs(&[&["1+s", "0.5"], &["0.5", "2"]]).unwrap();
        spec.r = MatrixFn::constant(Mat::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 1.0]));
        let v = validate_problem(spec).unwrap();
        let again = v.clone().revalidate().unwrap();
        assert_eq!(v, again);
    }

    #[test]
    fn initial_law_checks() {
        assert!(InitialLaw::gaussian(Vect::zeros(1), Mat::from_element(1, 1, -1.0)).is_err());
        let bad = InitialLaw {
            mean: Vect::zeros(1),
            cov: Mat::from_element(1, 1, 1.0),
            kind: SamplerKind::Deterministic,
        };
        assert!(bad.validate(1).is_err());
        assert!(InitialLaw::deterministic(Vect::from_element(2, 1.0)).validate(2).is_ok());
    }

    #[test]
    fn regularisation_shifts_fold() {
        let r = MatrixFn::scalar_expr("s").unwrap();
        let twice = r.shifted(0.1).shifted(0.2);
        let once = r.shifted(0.1 + 0.2);
        assert_eq!(twice, once);
    }

    proptest! {
        #[test]
        fn linear_samples_exact_at_nodes(vals in prop::collection::vec(-1e3f64..1e3, 2..12)) {
            let times: Vec<f64> = (0..vals.len()).map(|k| k as f64 * 0.3).collect();
            let mats: Vec<Mat> = vals.iter().map(|v| Mat::from_element(1, 1, *v)).collect();
            let f = MatrixFn::Sampled(SampledFn::new(times.clone(), mats, Interp::PiecewiseLinear).unwrap());
            for (t, v) in times.iter().zip(&vals) {
                prop_assert_eq!(f.eval(*t).unwrap()[(0, 0)], *v);
            }
        }

        #[test]
        fn symmetrization_preserves_quadratic_form(
            entries in prop::collection::vec(-10f64..10.0, 9),
            x in prop::collection::vec(-10f64..10.0, 3),
        ) {
            let m = Mat::from_row_slice(3, 3, &entries);
            let x = Vect::from_vec(x);
            let lhs = x.dot(&(&m * &x));
            let rhs = x.dot(&(symmetrize(&m) * &x));
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }
    }
}
