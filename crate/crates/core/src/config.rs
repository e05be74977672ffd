//! TOML problem files.
//!
//! ```toml
//! [dimensions]
//! n = 1
//! m = 1
//!
//! [horizon]
//! t0 = 0.0
//! T = 1.0
//! n_steps = 2000
//!
//! [coefficients]          # omitted coefficients are zero
//! Abar = 1
//! D = "2^0.5"
//! R = [["(s+1)^3 - 4*(s+1)^2"]]
//! b = { times = [0.0, 1.0], values = [0.0, 1.0], interp = "piecewise-linear" }
//!
//! [terminal]
//! G = 8
//! Gbar = -8.05
//!
//! [initial]
//! mean = [0.0]
//! cov = [[1.0]]
//! kind = "gaussian"
//! ```
//!
//! An entry is a number or expression string (1×1), a flat list (column),
//! a nested list (row-major matrix), or a sampled table whose `values` are
//! entries of one shape.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::linalg::{Mat, Vect};
use crate::problem::{
    validate_problem, InitialLaw, Interp, MatrixFn, ProblemError, ProblemSpec, SampledFn, SamplerKind, TimeGrid,
    ValidatedProblem,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("unknown coefficient `{0}`")]
    UnknownCoefficient(String),
    #[error("`{name}`: {message}")]
    Entry { name: String, message: String },
    #[error("`{name}`: {source}")]
    Expression { name: String, source: ExprError },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("cannot emit `{name}`: {message}")]
    Emit { name: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Text(String),
    List(Vec<Entry>),
    Sampled { times: Vec<f64>, values: Vec<Entry>, interp: Interp },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Dimensions {
    n: usize,
    m: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Horizon {
    t0: f64,
    #[serde(rename = "T")]
    t_end: f64,
    n_steps: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Terminal {
    #[serde(rename = "G", skip_serializing_if = "Option::is_none")]
    g: Option<Entry>,
    #[serde(rename = "Gbar", skip_serializing_if = "Option::is_none")]
    g_bar: Option<Entry>,
    #[serde(rename = "g", skip_serializing_if = "Option::is_none")]
    g_lin: Option<Entry>,
    #[serde(rename = "gbar", skip_serializing_if = "Option::is_none")]
    g_bar_lin: Option<Entry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Initial {
    mean: Entry,
    #[serde(skip_serializing_if = "Option::is_none")]
    cov: Option<Entry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kind: Option<SamplerKind>,
}

/// Optional run defaults a config may carry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDefaults {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    dimensions: Dimensions,
    horizon: Horizon,
    #[serde(default)]
    coefficients: BTreeMap<String, Entry>,
    #[serde(default)]
    terminal: Terminal,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial: Option<Initial>,
    #[serde(default, skip_serializing_if = "is_default_run")]
    run: RunDefaults,
}

fn is_default_run(r: &RunDefaults) -> bool {
    r == &RunDefaults::default()
}

#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub problem: ValidatedProblem,
    pub initial: InitialLaw,
    pub run: RunDefaults,
    /// parse-time hazards in coefficient expressions
    pub warnings: Vec<String>,
}

/// One scalar cell of an entry.
enum Cell {
    Value(f64),
    Expr(Expr),
}

fn entry_err(name: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Entry { name: name.into(), message: message.into() }
}

/// Shape and row-major cells of a non-sampled entry.
fn cells(name: &str, e: &Entry) -> Result<(usize, usize, Vec<Cell>), ConfigError> {
    let scalar = |e: &Entry| -> Result<Cell, ConfigError> {
        match e {
            Entry::Number(v) => Ok(Cell::Value(*v)),
            Entry::Text(t) => Expr::parse(t)
                .map(Cell::Expr)
                .map_err(|source| ConfigError::Expression { name: name.into(), source }),
            _ => Err(entry_err(name, "expected a number or expression")),
        }
    };
    match e {
        Entry::Number(_) | Entry::Text(_) => Ok((1, 1, vec![scalar(e)?])),
        Entry::List(items) if items.is_empty() => Err(entry_err(name, "empty list")),
        Entry::List(items) if items.iter().all(|i| matches!(i, Entry::List(_))) => {
            let mut out = Vec::new();
            let mut cols = None;
            for row in items {
                let Entry::List(row) = row else { unreachable!() };
                if *cols.get_or_insert(row.len()) != row.len() || row.is_empty() {
                    return Err(entry_err(name, "ragged matrix rows"));
                }
                for c in row {
                    out.push(scalar(c)?);
                }
            }
            Ok((items.len(), cols.unwrap(), out))
        }
        Entry::List(items) => Ok((items.len(), 1, items.iter().map(scalar).collect::<Result<_, _>>()?)),
        Entry::Sampled { .. } => Err(entry_err(name, "sampled form is not allowed here")),
    }
}

fn constant_cells(name: &str, rows: usize, cols: usize, cells: Vec<Cell>) -> Result<Mat, ConfigError> {
    let vals = cells
        .into_iter()
        .map(|c| match c {
            Cell::Value(v) => Ok(v),
            Cell::Expr(e) if e.is_constant() => {
                e.eval(0.0).map_err(|source| ConfigError::Expression { name: name.into(), source })
            }
            Cell::Expr(_) => Err(entry_err(name, "must be constant")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Mat::from_row_slice(rows, cols, &vals))
}

fn matrix_fn(name: &str, e: &Entry, warnings: &mut Vec<String>) -> Result<MatrixFn, ConfigError> {
    if let Entry::Sampled { times, values, interp } = e {
        let mats = values
            .iter()
            .map(|v| {
                let (r, c, cs) = cells(name, v)?;
                constant_cells(name, r, c, cs)
            })
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(MatrixFn::Sampled(SampledFn::new(times.clone(), mats, *interp)?));
    }
    let (rows, cols, cs) = cells(name, e)?;
    if cs.iter().all(|c| matches!(c, Cell::Value(_))) {
        return constant_cells(name, rows, cols, cs).map(MatrixFn::Constant);
    }
    let entries = cs
        .into_iter()
        .map(|c| match c {
            Cell::Value(v) => Expr::constant(v),
            Cell::Expr(e) => e,
        })
        .collect::<Vec<_>>();
    for e in &entries {
        warnings.extend(e.warnings().into_iter().map(|w| format!("{name}: {w}")));
    }
    Ok(MatrixFn::Expr { rows, cols, entries })
}

const COEFFICIENTS: [&str; 20] = [
    "A", "Abar", "B", "Bbar", "C", "Cbar", "D", "Dbar", "Q", "Qbar", "S", "Sbar", "R", "Rbar", "b", "sigma", "q",
    "qbar", "rho", "rhobar",
];

fn slot<'a>(spec: &'a mut ProblemSpec, name: &str) -> Option<&'a mut MatrixFn> {
    Some(match name {
        "A" => &mut spec.a,
        "Abar" => &mut spec.a_bar,
        "B" => &mut spec.b,
        "Bbar" => &mut spec.b_bar,
        "C" => &mut spec.c,
        "Cbar" => &mut spec.c_bar,
        "D" => &mut spec.d,
        "Dbar" => &mut spec.d_bar,
        "Q" => &mut spec.q,
        "Qbar" => &mut spec.q_bar,
        "S" => &mut spec.s,
        "Sbar" => &mut spec.s_bar,
        "R" => &mut spec.r,
        "Rbar" => &mut spec.r_bar,
        "b" => &mut spec.drift,
        "sigma" => &mut spec.diffusion,
        "q" => &mut spec.q_lin,
        "qbar" => &mut spec.q_bar_lin,
        "rho" => &mut spec.rho,
        "rhobar" => &mut spec.rho_bar,
        _ => return None,
    })
}

fn get<'a>(spec: &'a ProblemSpec, name: &str) -> &'a MatrixFn {
    match name {
        "A" => &spec.a,
        "Abar" => &spec.a_bar,
        "B" => &spec.b,
        "Bbar" => &spec.b_bar,
        "C" => &spec.c,
        "Cbar" => &spec.c_bar,
        "D" => &spec.d,
        "Dbar" => &spec.d_bar,
        "Q" => &spec.q,
        "Qbar" => &spec.q_bar,
        "S" => &spec.s,
        "Sbar" => &spec.s_bar,
        "R" => &spec.r,
        "Rbar" => &spec.r_bar,
        "b" => &spec.drift,
        "sigma" => &spec.diffusion,
        "q" => &spec.q_lin,
        "qbar" => &spec.q_bar_lin,
        "rho" => &spec.rho,
        _ => &spec.rho_bar,
    }
}

fn constant_entry(name: &str, e: &Option<Entry>, shape: (usize, usize)) -> Result<Mat, ConfigError> {
    match e {
        None => Ok(Mat::zeros(shape.0, shape.1)),
        Some(e) => {
            let (r, c, cs) = cells(name, e)?;
            let m = constant_cells(name, r, c, cs)?;
            if m.shape() != shape {
                return Err(ProblemError::Shape { name: name.into(), expected: shape, found: m.shape() }.into());
            }
            Ok(m)
        }
    }
}

fn to_vect(m: Mat) -> Vect {
    Vect::from_column_slice(m.as_slice())
}

pub fn parse_config(text: &str) -> Result<LoadedConfig, ConfigError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let (n, m) = (file.dimensions.n, file.dimensions.m);
    let grid = TimeGrid::new(file.horizon.t0, file.horizon.t_end, file.horizon.n_steps)?;
    let mut spec = ProblemSpec::zeros(n, m, grid);
    let mut warnings = Vec::new();
    for (name, entry) in &file.coefficients {
        let f = matrix_fn(name, entry, &mut warnings)?;
        *slot(&mut spec, name).ok_or_else(|| ConfigError::UnknownCoefficient(name.clone()))? = f;
    }
    let t = &file.terminal;
    spec.g = constant_entry("G", &t.g, (n, n))?;
    spec.g_bar = constant_entry("Gbar", &t.g_bar, (n, n))?;
    spec.g_lin = to_vect(constant_entry("g", &t.g_lin, (n, 1))?);
    spec.g_bar_lin = to_vect(constant_entry("gbar", &t.g_bar_lin, (n, 1))?);
    let problem = validate_problem(spec)?;

    let initial = match &file.initial {
        None => InitialLaw::zero(n),
        Some(init) => {
            let mean = to_vect(constant_entry("mean", &Some(init.mean.clone()), (n, 1))?);
            let cov = constant_entry("cov", &init.cov, (n, n))?;
            let kind = init.kind.unwrap_or(if cov.iter().all(|v| *v == 0.0) {
                SamplerKind::Deterministic
            } else {
                SamplerKind::Gaussian
            });
            let law = InitialLaw { mean, cov, kind };
            law.validate(n)?;
            law
        }
    };
    Ok(LoadedConfig { problem, initial, run: file.run, warnings })
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}

fn mat_entry(m: &Mat) -> Entry {
    if m.shape() == (1, 1) {
        return Entry::Number(m[(0, 0)]);
    }
    Entry::List((0..m.nrows()).map(|i| Entry::List(m.row(i).iter().map(|v| Entry::Number(*v)).collect())).collect())
}

fn emit_fn(name: &str, f: &MatrixFn) -> Result<Entry, ConfigError> {
    let fail = |message: &str| ConfigError::Emit { name: name.into(), message: message.into() };
    match f {
        MatrixFn::Constant(m) => Ok(mat_entry(m)),
        MatrixFn::Expr { rows, cols, entries } => {
            let text = |i: usize| Entry::Text(entries[i].to_string());
            if (*rows, *cols) == (1, 1) {
                return Ok(text(0));
            }
            Ok(Entry::List((0..*rows).map(|r| Entry::List((0..*cols).map(|c| text(r * cols + c)).collect())).collect()))
        }
        MatrixFn::Sampled(s) => Ok(Entry::Sampled {
            times: s.times().to_vec(),
            values: s.values().iter().map(mat_entry).collect(),
            interp: s.interp(),
        }),
        MatrixFn::Symmetric(inner) => emit_fn(name, inner),
        MatrixFn::Shifted { base, shift } => match base.as_ref() {
            MatrixFn::Constant(m) => {
                let mut m = m.clone();
                for i in 0..m.nrows().min(m.ncols()) {
                    m[(i, i)] += shift;
                }
                Ok(mat_entry(&m))
            }
            MatrixFn::Expr { rows, cols, entries } => {
                let mut entries = entries.clone();
                for i in 0..(*rows).min(*cols) {
                    let e = &mut entries[i * cols + i];
                    *e = Expr::Add(Box::new(e.clone()), Box::new(Expr::constant(*shift)));
                }
                emit_fn(name, &MatrixFn::Expr { rows: *rows, cols: *cols, entries })
            }
            MatrixFn::Symmetric(inner) => emit_fn(name, &inner.shifted(*shift)),
            _ => Err(fail("shifted sampled or summed functions have no config form")),
        },
        MatrixFn::Sum(_) => Err(fail("summed functions have no config form")),
    }
}

/// Config text that parses back to a problem with identical evaluations.
pub fn emit_config(spec: &ProblemSpec, initial: &InitialLaw, run: &RunDefaults) -> Result<String, ConfigError> {
    let mut coefficients = BTreeMap::new();
    for name in COEFFICIENTS {
        let f = get(spec, name);
        if let MatrixFn::Constant(m) = f {
            if m.iter().all(|v| *v == 0.0) {
                continue;
            }
        }
        coefficients.insert(name.to_string(), emit_fn(name, f)?);
    }
    let file = ConfigFile {
        dimensions: Dimensions { n: spec.n, m: spec.m },
        horizon: Horizon { t0: spec.grid.t0, t_end: spec.grid.t_end, n_steps: spec.grid.n_steps },
        coefficients,
        terminal: Terminal {
            g: Some(mat_entry(&spec.g)),
            g_bar: Some(mat_entry(&spec.g_bar)),
            g_lin: Some(Entry::List(spec.g_lin.iter().map(|v| Entry::Number(*v)).collect())),
            g_bar_lin: Some(Entry::List(spec.g_bar_lin.iter().map(|v| Entry::Number(*v)).collect())),
        },
        initial: Some(Initial {
            mean: Entry::List(initial.mean.iter().map(|v| Entry::Number(*v)).collect()),
            cov: Some(mat_entry(&initial.cov)),
            kind: Some(initial.kind),
        }),
        run: run.clone(),
    };
    toml::to_string(&file).map_err(|e| ConfigError::Emit { name: "config".into(), message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[dimensions]
n = 2
m = 1

[horizon]
t0 = 0.0
T = 2.0
n_steps = 8

[coefficients]
A = [[0, 1], [-1, "s/2"]]
B = [1, 0]
R = "1 + s^2"
sigma = { times = [0.0, 1.0, 2.0], values = [[0, 0], [1, 0], [1, 1]], interp = "piecewise-linear" }

[terminal]
G = [[1, 0], [0, 2]]
g = [0.5, 0]

[initial]
mean = [1, -1]
cov = [[1, 0], [0, 0.5]]
"#;

    #[test]
    fn parses_every_entry_form() {
        let cfg = parse_config(SAMPLE).unwrap();
        let p = &cfg.problem;
        assert_eq!(p.a.eval(1.0).unwrap(), Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.5]));
        assert_eq!(p.b.eval(0.0).unwrap(), Mat::from_row_slice(2, 1, &[1.0, 0.0]));
        assert_eq!(p.r.eval(2.0).unwrap()[(0, 0)], 5.0);
        assert_eq!(p.diffusion.eval(1.5).unwrap(), Mat::from_row_slice(2, 1, &[1.0, 0.5]));
        assert_eq!(p.g_lin[0], 0.5);
        assert_eq!(cfg.initial.kind, SamplerKind::Gaussian);
        assert_eq!(p.q, MatrixFn::zeros(2, 2));
    }

    #[test]
    fn round_trip_preserves_evaluations() {
        let cfg = parse_config(SAMPLE).unwrap();
        let text = emit_config(&cfg.problem, &cfg.initial, &cfg.run).unwrap();
        let back = parse_config(&text).unwrap();
        for t in cfg.problem.grid.nodes() {
            let (a, b) = (cfg.problem.coefficients_at(t).unwrap(), back.problem.coefficients_at(t).unwrap());
            assert_eq!(a.a, b.a);
            assert_eq!(a.r, b.r);
            assert_eq!(a.diffusion, b.diffusion);
        }
        assert_eq!(cfg.initial, back.initial);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_config("[dimensions]\nn=1\nm=1\n"), Err(ConfigError::Syntax(_))));
        let base = "[dimensions]\nn=1\nm=1\n[horizon]\nt0=0\nT=1\nn_steps=4\n";
        assert!(matches!(
            parse_config(&format!("{base}[coefficients]\nZ = 1\n")),
            Err(ConfigError::UnknownCoefficient(_))
        ));
        assert!(matches!(
            parse_config(&format!("{base}[coefficients]\nA = \"2*x\"\n")),
            Err(ConfigError::Expression { .. })
        ));
        assert!(matches!(
            parse_config(&format!("{base}[coefficients]\nA = [1, 2]\n")),
            Err(ConfigError::Problem(ProblemError::Shape { .. }))
        ));
        assert!(matches!(parse_config(&format!("{base}[terminal]\nG = \"s\"\n")), Err(ConfigError::Entry { .. })));
    }

    #[test]
    fn shifted_r_emits_and_reparses() {
        let cfg = parse_config(SAMPLE).unwrap();
        let mut spec = cfg.problem.spec().clone();
        spec.r = spec.r.shifted(0.25).shifted(0.5);
        let text = emit_config(&spec, &cfg.initial, &cfg.run).unwrap();
        let back = parse_config(&text).unwrap();
        for t in spec.grid.nodes() {
            assert_eq!(back.problem.r.eval(t).unwrap(), spec.r.eval(t).unwrap());
        }
    }
}
