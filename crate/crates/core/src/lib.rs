//! Mean-field linear-quadratic stochastic optimal control.

pub mod expr;
pub mod linalg;
pub mod problem;
pub mod riccati;
pub mod auxiliary;
pub mod moments;
pub mod montecarlo;
pub mod epsilon;
pub mod config;
pub mod oracle;
pub mod report;
pub mod cli;
