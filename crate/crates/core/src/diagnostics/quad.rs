//! Adaptive trapezoid quadrature on truncated boxes, for normalizing
//! low-dimensional Gibbs densities and taking Gaussian expectations of
//! neuron outputs. Densities here decay like `exp(-q ||x||^2 / lambda)`
//! outside a bounded tilt, so trapezoid sums on a generous box converge
//! fast; refinement doubles the mesh until the increment is below
//! tolerance.

use crate::diagnostics::gauss::AnalyticGaussian;
use crate::{Error, Result};

const MAX_DOUBLINGS_1D: u32 = 22;
const MAX_DOUBLINGS_2D: u32 = 12;
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Integrate `f` on `[lo, hi]`, refining until the doubling increment is
/// within `rel_tol` of the running value plus `abs_scale` (the absolute
/// scale keeps near-zero integrals, e.g. of odd integrands, from spinning
/// forever on rounding noise).
pub fn integrate_1d<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    abs_scale: f64,
) -> Result<f64> {
    if hi.is_nan() || lo.is_nan() || hi <= lo {
        return Err(Error::Quadrature(format!("bad interval [{lo}, {hi}]")));
    }
    let mut n: usize = 64;
    let mut h = (hi - lo) / n as f64;
    let mut sum = 0.5 * (f(lo) + f(hi));
    for i in 1..n {
        sum += f(lo + i as f64 * h);
    }
    let mut value = sum * h;
    for _ in 0..MAX_DOUBLINGS_1D {
        // add midpoints
        let mut mid = 0.0;
        for i in 0..n {
            mid += f(lo + (i as f64 + 0.5) * h);
        }
        sum += mid;
        n *= 2;
        h *= 0.5;
        let next = sum * h;
        let delta = (next - value).abs();
        value = next;
        if delta <= rel_tol * (value.abs() + abs_scale + 1e-300) {
            return Ok(value);
        }
    }
    Err(Error::Quadrature(format!(
        "1-d integral did not settle below rel tol {rel_tol} on [{lo}, {hi}]"
    )))
}

/// Tensor-grid trapezoid on a rectangle, same refinement policy.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    lo: (f64, f64),
    hi: (f64, f64),
    rel_tol: f64,
    abs_scale: f64,
) -> Result<f64> {
    if hi.0.is_nan() || hi.1.is_nan() || hi.0 <= lo.0 || hi.1 <= lo.1 {
        return Err(Error::Quadrature("bad rectangle".into()));
    }
    let eval = |n: usize| -> f64 {
        let hx = (hi.0 - lo.0) / n as f64;
        let hy = (hi.1 - lo.1) / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let wx = if i == 0 || i == n { 0.5 } else { 1.0 };
            let x = lo.0 + i as f64 * hx;
            let mut row = 0.0;
            for j in 0..=n {
                let wy = if j == 0 || j == n { 0.5 } else { 1.0 };
                row += wy * f(x, lo.1 + j as f64 * hy);
            }
            total += wx * row;
        }
        total * hx * hy
    };
    let mut n = 32usize;
    let mut value = eval(n);
    for _ in 0..MAX_DOUBLINGS_2D {
        n *= 2;
        let next = eval(n);
        let delta = (next - value).abs();
        value = next;
        if delta <= rel_tol * (value.abs() + abs_scale + 1e-300) {
            return Ok(value);
        }
    }
    Err(Error::Quadrature(format!("2-d integral did not settle below rel tol {rel_tol}")))
}

/// `E_{X ~ g}[ f(X) ]` for a diagonal Gaussian in d <= 2, integrating over
/// mean +- 9 standard deviations (tail mass below 1e-17).
pub fn gaussian_expect<F: Fn(&[f64]) -> f64>(g: &AnalyticGaussian, f: F) -> Result<f64> {
    match g.dim() {
        1 => {
            let (m, s) = (g.mean[0], g.var[0].sqrt());
            integrate_1d(
                |x| f(&[x]) * g.log_density(&[x]).exp(),
                m - 9.0 * s,
                m + 9.0 * s,
                DEFAULT_REL_TOL,
                1.0,
            )
        }
        2 => {
            let (m0, s0) = (g.mean[0], g.var[0].sqrt());
            let (m1, s1) = (g.mean[1], g.var[1].sqrt());
            integrate_2d(
                |x, y| f(&[x, y]) * g.log_density(&[x, y]).exp(),
                (m0 - 9.0 * s0, m1 - 9.0 * s1),
                (m0 + 9.0 * s0, m1 + 9.0 * s1),
                1e-9,
                1.0,
            )
        }
        d => Err(Error::DimensionTooHigh(d)),
    }
}
