//! Command-line front end: `check`, `solve`, `value`, `simulate`,
//! `sweep-epsilon` and `oracle` on a problem config file.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use crate::auxiliary::{solve_optimal, value_at, OptimalSolution};
use crate::config::{load_config, ConfigError, LoadedConfig};
use crate::epsilon::{diagnose_solvability, DiagnoseOptions, EpsilonError};
use crate::linalg::Mat;
use crate::moments::exact_cost;
use crate::montecarlo::{ensemble_stats, estimate_cost, MonteCarloError, SimConfig};
use crate::oracle::{brute_force_minimum, BruteForceConfig};
use crate::problem::{ProblemError, ValidatedProblem};
use crate::report::{path_table, write_outputs, OutputFormat, ReportError, Table};
use crate::riccati::{check_classic_condition, check_standard_condition, feedback_gains, solve_riccati, RiccatiError, RiccatiOptions};

pub const DEFAULT_SCHEDULE: [f64; 5] = [1.0, 0.3, 0.1, 0.03, 0.01];
pub const DEFAULT_PATHS: usize = 10_000;
pub const DEFAULT_SEED: u64 = 0;
/// brute-force minimum and Riccati value must agree to this
pub const ORACLE_TOL: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(name = "mflq", version, about = "Mean-field linear-quadratic control solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Sufficient convexity conditions and Riccati solvability
    Check,
    /// Riccati paths, feedback gains and regularity margins
    Solve,
    /// Value at the initial law and auxiliary paths
    Value,
    /// Monte-Carlo cost estimate and moment comparison
    Simulate,
    /// Regularisation sweep and solvability verdict
    SweepEpsilon,
    /// Brute-force optimiser compared with the Riccati value
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Check => "check",
            Self::Solve => "solve",
            Self::Value => "value",
            Self::Simulate => "simulate",
            Self::SweepEpsilon => "sweep-epsilon",
            Self::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Problem config file (TOML)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the solver grid's number of steps
    #[arg(long, global = true, value_name = "N")]
    grid_steps: Option<usize>,
    /// Number of Monte-Carlo paths
    #[arg(long, global = true, value_name = "N")]
    paths: Option<usize>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Comma-separated, strictly decreasing regularisation schedule
    #[arg(long, global = true, value_delimiter = ',', value_name = "a,b,c")]
    epsilon_list: Option<Vec<f64>>,
    #[arg(long, global = true, value_name = "PATH", default_value = "output")]
    output_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Both)]
    format: OutputFormat,
}

/// A fully parsed invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub problem_path: PathBuf,
    pub grid_steps: Option<usize>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub epsilon_list: Option<Vec<f64>>,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Epsilon(#[from] EpsilonError),
    #[error(transparent)]
    MonteCarlo(#[from] MonteCarloError),
    #[error(transparent)]
    Report(#[from] ReportError),
}

/// Result of a command: the summary, its tables and whether it is a solver failure.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Value,
    pub tables: Vec<Table>,
    pub failure: bool,
}

impl Outcome {
    fn ok(summary: Value, tables: Vec<Table>) -> Self {
        Self { summary, tables, failure: false }
    }

    fn failed(summary: Value) -> Self {
        Self { summary, tables: Vec::new(), failure: true }
    }

    pub fn exit_code(&self) -> i32 {
        if self.failure {
            2
        } else {
            0
        }
    }
}

pub fn parse_args<I, T>(args: I) -> Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let c = cli.common;
    let problem_path = c
        .config
        .ok_or_else(|| clap::Error::raw(clap::error::ErrorKind::MissingRequiredArgument, "--config is required\n"))?;
    Ok(RunConfig {
        command: cli.command,
        problem_path,
        grid_steps: c.grid_steps,
        paths: c.paths,
        seed: c.seed,
        epsilon_list: c.epsilon_list,
        output_dir: c.output_dir,
        format: c.format,
    })
}

fn load(cfg: &RunConfig) -> Result<LoadedConfig, CliError> {
    let mut loaded = load_config(&cfg.problem_path)?;
    if let Some(n) = cfg.grid_steps {
        let grid = loaded.problem.grid.with_steps(n)?;
        loaded.problem = loaded.problem.with_grid(grid)?;
    }
    Ok(loaded)
}

fn riccati_failure(command: Command, err: &RiccatiError) -> Outcome {
    Outcome::failed(json!({ "command": command.name(), "riccati_ok": false, "error": err.to_string() }))
}

fn sample(problem: &ValidatedProblem, f: &crate::problem::MatrixFn) -> Result<Vec<Mat>, ProblemError> {
    problem.grid.nodes().into_iter().map(|s| f.eval(s)).collect()
}

fn check(loaded: &LoadedConfig) -> Result<Outcome, CliError> {
    let prob = &loaded.problem;
    let classic = check_classic_condition(prob)?;
    let standard = check_standard_condition(prob)?;
    let riccati = solve_riccati(prob, &prob.grid, &RiccatiOptions::default());
    let mut summary = json!({
        "command": "check",
        "classic_condition": classic,
        "standard_condition": standard,
        "riccati_ok": riccati.is_ok(),
    });
    match &riccati {
        Ok(r) => {
            summary["delta0"] = json!(r.delta0);
            summary["delta_sigma"] = json!(r.delta_sigma);
            summary["strongly_regular"] = json!(r.strongly_regular);
            summary["sigma_positive"] = json!(r.sigma_positive);
        }
        Err(e) => summary["error"] = json!(e.to_string()),
    }
    Ok(Outcome { summary, tables: Vec::new(), failure: riccati.is_err() })
}

fn solve(loaded: &LoadedConfig) -> Result<Outcome, CliError> {
    let prob = &loaded.problem;
    let ric = match solve_riccati(prob, &prob.grid, &RiccatiOptions::default()) {
        Ok(r) => r,
        Err(e) => return Ok(riccati_failure(Command::Solve, &e)),
    };
    let gains = match feedback_gains(prob, &ric) {
        Ok(g) => g,
        Err(e) => return Ok(riccati_failure(Command::Solve, &e)),
    };
    let theta = sample(prob, &gains.theta)?;
    let theta_bar = sample(prob, &gains.theta_bar)?;
    let table = path_table(
        "riccati",
        &prob.grid.nodes(),
        &[("P", ric.p.values()), ("Pi", ric.pi.values()), ("Theta", &theta), ("ThetaBar", &theta_bar)],
    );
    let summary = json!({
        "command": "solve",
        "riccati_ok": true,
        "n_steps": prob.grid.n_steps,
        "delta0": ric.delta0,
        "delta_sigma": ric.delta_sigma,
        "strongly_regular": ric.strongly_regular,
        "sigma_positive": ric.sigma_positive,
        "max_asymmetry": ric.p.max_asymmetry().max(ric.pi.max_asymmetry()),
    });
    Ok(Outcome::ok(summary, vec![table]))
}

fn optimal(prob: &ValidatedProblem, command: Command) -> Result<OptimalSolution, Outcome> {
    solve_optimal(prob, &RiccatiOptions::default()).map_err(|e| riccati_failure(command, &e))
}

fn value(loaded: &LoadedConfig) -> Result<Outcome, CliError> {
    let prob = &loaded.problem;
    let opt = match optimal(prob, Command::Value) {
        Ok(o) => o,
        Err(out) => return Ok(out),
    };
    let v = match value_at(prob, &opt.riccati, &opt.aux, &loaded.initial) {
        Ok(v) => v,
        Err(e) => return Ok(riccati_failure(Command::Value, &e)),
    };
    let cost = exact_cost(prob, &opt.law, &loaded.initial)?;
    let phi = sample(prob, &opt.aux.phi)?;
    let phi_bar = sample(prob, &opt.aux.phi_bar)?;
    let table = path_table(
        "auxiliary",
        &prob.grid.nodes(),
        &[("eta", opt.aux.eta.values()), ("etaBar", opt.aux.eta_bar.values()), ("phi", &phi), ("phiBar", &phi_bar)],
    );
    let summary = json!({
        "command": "value",
        "riccati_ok": true,
        "value": v,
        "optimal_law_cost": cost,
        "initial_mean": loaded.initial.mean.as_slice(),
        "initial_kind": loaded.initial.kind,
    });
    Ok(Outcome::ok(summary, vec![table]))
}

fn simulate(loaded: &LoadedConfig, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let prob = &loaded.problem;
    let opt = match optimal(prob, Command::Simulate) {
        Ok(o) => o,
        Err(out) => return Ok(out),
    };
    let n_paths = cfg.paths.or(loaded.run.paths).unwrap_or(DEFAULT_PATHS);
    let seed = cfg.seed.or(loaded.run.seed).unwrap_or(DEFAULT_SEED);
    let sim = SimConfig::new(n_paths, seed, prob.grid);
    let exact = exact_cost(prob, &opt.law, &loaded.initial)?;
    let (est, stats) = match estimate_cost(prob, &opt.law, &loaded.initial, &sim)
        .and_then(|e| ensemble_stats(prob, &opt.law, &loaded.initial, &sim).map(|s| (e, s)))
    {
        Ok(v) => v,
        Err(e @ MonteCarloError::NonFinite { .. }) => {
            return Ok(Outcome::failed(json!({ "command": "simulate", "error": e.to_string() })));
        }
        Err(e) => return Err(e.into()),
    };
    let col = |v: &[crate::linalg::Vect]| v.iter().map(|x| Mat::from_column_slice(x.len(), 1, x.as_slice())).collect::<Vec<_>>();
    let table = path_table(
        "moments",
        &prob.grid.nodes(),
        &[
            ("mc_mean", &col(&stats.mean)),
            ("exact_mean", &col(&stats.exact.mean)),
            ("mc_cov", &stats.cov),
            ("exact_cov", &stats.exact.cov),
        ],
    );
    let mut max_mean_z = 0.0f64;
    for (k, (mc, ex)) in stats.mean.iter().zip(&stats.exact.mean).enumerate() {
        for i in 0..mc.len() {
            let se = stats.mean_std_error(k, i);
            if se > 0.0 {
                max_mean_z = max_mean_z.max((mc[i] - ex[i]).abs() / se);
            }
        }
    }
    let summary = json!({
        "command": "simulate",
        "riccati_ok": true,
        "n_paths": n_paths,
        "seed": seed,
        "n_steps": prob.grid.n_steps,
        "estimate": est.mean,
        "std_error": est.std_error,
        "exact_cost": exact,
        "z_score": est.z_score(exact),
        "max_mean_z_score": max_mean_z,
    });
    Ok(Outcome::ok(summary, vec![table]))
}

fn sweep(loaded: &LoadedConfig, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let prob = &loaded.problem;
    let schedule = cfg.epsilon_list.clone().or_else(|| loaded.run.epsilon.clone()).unwrap_or_else(|| DEFAULT_SCHEDULE.to_vec());
    let rep = diagnose_solvability(prob, &loaded.initial, &schedule, &DiagnoseOptions::default())?;
    let mut table = Table::new(
        "sweep",
        ["epsilon", "value", "norm", "delta0", "delta_sigma"].map(String::from).to_vec(),
    );
    for r in &rep.records {
        table.push(vec![Some(r.epsilon), r.value, r.norm, r.delta0, r.delta_sigma]);
    }
    let mut tables = vec![table];
    if let Some(law) = &rep.limit_law {
        let gain = sample(prob, law.gain())?;
        let mean_gain = sample(prob, law.mean_gain())?;
        let offset = sample(prob, law.offset_mean())?;
        tables.push(path_table("limit_law", &prob.grid.nodes(), &[("K", &gain), ("Kbar", &mean_gain), ("k", &offset)]));
    }
    let mut summary = serde_json::to_value(&rep).map_err(ReportError::from)?;
    summary["command"] = json!("sweep-epsilon");
    summary["values_monotone"] = json!(rep.values_monotone(1e-9));
    Ok(Outcome { summary, tables, failure: rep.verdict.is_failure() })
}

fn oracle(loaded: &LoadedConfig) -> Result<Outcome, CliError> {
    let prob = &loaded.problem;
    let opt = match optimal(prob, Command::Oracle) {
        Ok(o) => o,
        Err(out) => return Ok(out),
    };
    let v = match value_at(prob, &opt.riccati, &opt.aux, &loaded.initial) {
        Ok(v) => v,
        Err(e) => return Ok(riccati_failure(Command::Oracle, &e)),
    };
    let law_cost = exact_cost(prob, &opt.law, &loaded.initial)?;
    let bf_cfg = BruteForceConfig::default();
    let brute = brute_force_minimum(prob, &loaded.initial, &bf_cfg)?;
    let summary = json!({
        "command": "oracle",
        "riccati_ok": true,
        "value": v,
        "riccati_law_cost": law_cost,
        "brute_force_cost": brute.cost,
        "brute_force_params": brute.params,
        "evaluations": brute.evaluations,
        "intervals": bf_cfg.intervals,
        "gap": brute.cost - v,
        "agree": (brute.cost - v).abs() <= ORACLE_TOL && law_cost <= brute.cost + 1e-6,
    });
    Ok(Outcome::ok(summary, Vec::new()))
}

/// Runs a parsed command and writes its outputs.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let loaded = load(cfg)?;
    let mut outcome = match cfg.command {
        Command::Check => check(&loaded)?,
        Command::Solve => solve(&loaded)?,
        Command::Value => value(&loaded)?,
        Command::Simulate => simulate(&loaded, cfg)?,
        Command::SweepEpsilon => sweep(&loaded, cfg)?,
        Command::Oracle => oracle(&loaded)?,
    };
    if !loaded.warnings.is_empty() {
        outcome.summary["warnings"] = json!(loaded.warnings);
    }
    write_outputs(&cfg.output_dir, cfg.format, &outcome.summary, &outcome.tables)?;
    Ok(outcome)
}

/// Entry point for the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match parse_args(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cfg) {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out.summary).unwrap_or_default());
            out.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flags() {
        let cfg = parse_args([
            "mflq",
            "sweep-epsilon",
            "--config",
            "p.cfg",
            "--epsilon-list",
            "1,0.5,0.25",
            "--grid-steps",
            "100",
            "--format",
            "csv",
        ])
        .unwrap();
        assert_eq!(cfg.command, Command::SweepEpsilon);
        assert_eq!(cfg.epsilon_list, Some(vec![1.0, 0.5, 0.25]));
        assert_eq!(cfg.grid_steps, Some(100));
        assert_eq!(cfg.format, OutputFormat::Csv);
        assert_eq!(cfg.output_dir, PathBuf::from("output"));
    }

    #[test]
    fn usage_errors() {
        assert!(parse_args(["mflq", "solve"]).is_err());
        assert!(parse_args(["mflq", "frobnicate", "--config", "x"]).is_err());
        assert!(parse_args(["mflq", "solve", "--config", "x", "--format", "xml"]).is_err());
        assert_eq!(run(["mflq", "solve"]), 1);
        assert_eq!(run(["mflq", "solve", "--config", "/nonexistent/p.cfg"]), 1);
    }
}
