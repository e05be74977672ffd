//! Small dense-matrix helpers, fixed-step RK4 and quadrature.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Mat = DMatrix<f64>;
pub type Vect = DVector<f64>;

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Frobenius norm of `M - Mᵀ`.
pub fn asymmetry(m: &Mat) -> f64 {
    (m - m.transpose()).norm()
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

pub fn is_finite(m: &Mat) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// State types that a fixed-step RK4 can advance.
pub trait OdeState: Clone {
    /// `self + h * k`
    fn axpy(&self, h: f64, k: &Self) -> Self;
}

impl OdeState for Mat {
    fn axpy(&self, h: f64, k: &Self) -> Self {
        self + k * h
    }
}

/// One classical RK4 step from `y(t)` to `y(t + h)`; `h` may be negative.
///
/// The right-hand side receives a stage index (0 = start, 1 = midpoint,
/// 2 = end) next to the time so callers can look up tabulated coefficients
/// without re-deriving the stage time.
pub fn rk4_step<Y, E, F>(y: &Y, h: f64, mut f: F) -> Result<Y, E>
where
    Y: OdeState,
    F: FnMut(usize, &Y) -> Result<Y, E>,
{
    let k1 = f(0, y)?;
    let k2 = f(1, &y.axpy(h / 2.0, &k1))?;
    let k3 = f(1, &y.axpy(h / 2.0, &k2))?;
    let k4 = f(2, &y.axpy(h, &k3))?;
    Ok(y.axpy(h / 6.0, &k1).axpy(h / 3.0, &k2).axpy(h / 3.0, &k3).axpy(h / 6.0, &k4))
}

/// Composite Simpson quadrature of equally spaced samples.
///
/// Odd interval counts take Simpson's 3/8 rule on the last three intervals;
/// a single interval falls back to the trapezoid rule.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (values[0] + values[1]),
        _ => {
            let (even_part, tail) = if n.is_multiple_of(2) { (n, 0) } else { (n - 3, 3) };
            let mut acc = 0.0;
            let mut k = 0;
            while k < even_part {
                acc += h / 3.0 * (values[k] + 4.0 * values[k + 1] + values[k + 2]);
                k += 2;
            }
            if tail == 3 {
                let v = &values[even_part..];
                acc += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            acc
        }
    }
}

pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Cubic Hermite interpolation between `(y0, d0)` at 0 and `(y1, d1)` at
/// `h`, evaluated at `theta * h`.
pub fn hermite(y0: &Mat, d0: &Mat, y1: &Mat, d1: &Mat, h: f64, theta: f64) -> Mat {
    let t = theta;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    y0 * h00 + d0 * (h10 * h) + y1 * h01 + d1 * (h11 * h)
}
