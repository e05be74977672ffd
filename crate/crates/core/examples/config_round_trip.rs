//! Parses a config written inline, emits it back to text and re-parses it.

use mflq::config::{emit_config, parse_config};

const TEXT: &str = r#"
[dimensions]
n = 2
m = 1

[horizon]
t0 = 0.0
T = 1.0
n_steps = 100

[coefficients]
A = [[0, 1], [-1, 0]]
B = [["0"], ["1 + 0.5*s"]]
D = [[0.2], [0]]
Q = [[1, 0], [0, "exp(-s)"]]
R = "1 + s^2"
sigma = { times = [0.0, 0.5, 1.0], values = [[[0.1], [0]], [[0.2], [0]], [[0.1], [0]]], interp = "piecewise-linear" }

[terminal]
G = [[1, 0], [0, 1]]

[initial]
mean = [1.0, 0.0]
cov = [[0.1, 0.0], [0.0, 0.1]]
kind = "gaussian"
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let first = parse_config(TEXT)?;
    let emitted = emit_config(first.problem.spec(), &first.initial, &first.run)?;
    println!("{emitted}");
    let second = parse_config(&emitted)?;
    let mut worst = 0.0f64;
    for s in first.problem.grid.nodes() {
        let (a, b) = (first.problem.coefficients_at(s)?, second.problem.coefficients_at(s)?);
        worst = worst.max((&a.b - &b.b).amax()).max((&a.q - &b.q).amax()).max((&a.diffusion - &b.diffusion).amax());
    }
    println!("max coefficient difference after round trip: {worst:e}");
    Ok(())
}
