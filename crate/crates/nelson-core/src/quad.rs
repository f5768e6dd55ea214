//! Adaptive one-dimensional quadrature on top of the tanh-sinh rule.

use crate::error::{LabError, Result};

const MAX_DEPTH: u32 = 40;

/// Integrates `f` over `[a, b]` to relative accuracy `tol`, bisecting where
/// the double-exponential error estimate is too large.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let coarse = quadrature::double_exponential::integrate(&f, a, b, 1e-3 * tol);
    let scale = coarse.integral.abs().max(f64::MIN_POSITIVE);
    let mut total = 0.0;
    let mut stack = vec![(a, b, 0u32)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let width_share = ((hi - lo) / (b - a)).abs();
        let target = tol * scale * width_share;
        let out = quadrature::double_exponential::integrate(&f, lo, hi, 0.1 * target);
        if !out.integral.is_finite() {
            return Err(LabError::Quadrature(format!("non-finite value on [{lo}, {hi}]")));
        }
        if out.error_estimate <= target {
            total += out.integral;
        } else if depth >= MAX_DEPTH {
            return Err(LabError::Quadrature(format!(
                "error estimate {:e} above target {:e} on [{lo}, {hi}]",
                out.error_estimate, target
            )));
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Ok(total)
}

/// Integrates `f` over `[a, inf)` through r = a + c (1/u^2 - 1), c = max(a, 1),
/// which keeps the integrand bounded for tails decaying like r^{-p}, p >= 3/2.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> Result<f64> {
    let c = a.abs().max(1.0);
    let g = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let r = a + c * (1.0 / (u * u) - 1.0);
        let v = f(r) * 2.0 * c / (u * u * u);
        if v.is_finite() { v } else { 0.0 }
    };
    integrate(g, 0.0, 1.0, tol)
}
