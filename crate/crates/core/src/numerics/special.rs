//! Special functions: the generalized exponential integral and Γ at negative
//! non-integer arguments.

use crate::error::{invalid, Result};
use crate::numerics::quad;

/// Γ(x) for any non-pole real `x`, using recurrence down from positive arguments.
pub fn gamma(x: f64) -> Result<f64> {
    if x <= 0.0 && x == x.round() {
        return invalid(format!("gamma has a pole at {x}"));
    }
    let mut y = x;
    let mut scale = 1.0;
    while y < 0.5 {
        scale /= y;
        y += 1.0;
    }
    Ok(scale * libm::tgamma(y))
}

/// `e^x E_m(x)` where `E_m(x) = ∫₁^∞ e^{-xt} t^{-m} dt`, for `x > 0` and `m ≥ 0`.
///
/// Uses the convergent power series for small `x` and non-integer `m`, and
/// adaptive quadrature of `x⁻¹∫₀^∞ e^{-u}(1+u/x)^{-m} du` otherwise.
pub fn expint_scaled(m: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return invalid(format!("expint requires finite x > 0, got {x}"));
    }
    if !(m >= 0.0) {
        return invalid(format!("expint requires m >= 0, got {m}"));
    }
    let near_int = (m - m.round()).abs() < 1e-6;
    if x < 1.0 && !near_int {
        return Ok(x.exp() * expint_series(m, x)?);
    }
    let f = |u: f64| (-u).exp() * (1.0 + u / x).powf(-m);
    let split = x.min(1.0);
    let a = quad::integrate(f, 0.0, split, 0.0, 1e-13)?;
    let b = quad::integrate(f, split, 60.0, 0.0, 1e-13)?;
    Ok((a + b) / x)
}

/// `E_m(x)`; underflows to zero for large `x`.
pub fn expint(m: f64, x: f64) -> Result<f64> {
    Ok(expint_scaled(m, x)? * (-x).exp())
}

fn expint_series(m: f64, x: f64) -> Result<f64> {
    let mut sum = 0.0;
    let mut term = 1.0; // (-x)^k / k!
    for k in 0..200 {
        let c = term / (k as f64 + 1.0 - m);
        sum += c;
        if c.abs() < 1e-18 * sum.abs().max(1e-300) && k > 2 {
            break;
        }
        term *= -x / (k as f64 + 1.0);
    }
    Ok(gamma(1.0 - m)? * x.powf(m - 1.0) - sum)
}
