//! Squeezing parameter from mapped readout decay times.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::VarianceMap;

/// Least-squares fit `c0 + a cos2θ + b sin2θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub c0: f64,
    pub a: f64,
    pub b: f64,
    pub min: f64,
    pub theta_min: f64,
    pub min_stderr: f64,
    pub r2: f64,
}

/// Fits a π-periodic sinusoid and returns its minimum. `stderr` may be empty
/// for an unweighted fit.
pub fn sinusoid_minimum(theta: &[f64], value: &[f64], stderr: &[f64]) -> Result<Sinusoid> {
    let n = theta.len();
    if n < 3 || value.len() != n || !(stderr.is_empty() || stderr.len() == n) {
        return invalid("sinusoid fit needs at least three angles with matching values");
    }
    let weighted = !stderr.is_empty() && stderr.iter().all(|&s| s > 0.0);
    let mut m = Matrix3::zeros();
    let mut r = Vector3::zeros();
    for k in 0..n {
        let w = if weighted { 1.0 / (stderr[k] * stderr[k]) } else { 1.0 };
        let phi = Vector3::new(1.0, (2.0 * theta[k]).cos(), (2.0 * theta[k]).sin());
        m += w * phi * phi.transpose();
        r += w * value[k] * phi;
    }
    let inv = m.try_inverse().ok_or_else(|| Error::Fit("angles do not determine a sinusoid".into()))?;
    let c = inv * r;
    let amp = c[1].hypot(c[2]);
    let mean = value.iter().sum::<f64>() / n as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for k in 0..n {
        let f = c[0] + c[1] * (2.0 * theta[k]).cos() + c[2] * (2.0 * theta[k]).sin();
        ss_res += (value[k] - f).powi(2);
        ss_tot += (value[k] - mean).powi(2);
    }
    let cov = if weighted {
        inv
    } else {
        inv * (ss_res / (n as f64 - 3.0).max(1.0))
    };
    let g = if amp > 0.0 {
        Vector3::new(1.0, -c[1] / amp, -c[2] / amp)
    } else {
        Vector3::new(1.0, 0.0, 0.0)
    };
    let var_min = (g.transpose() * cov * g)[(0, 0)].max(0.0);
    let mut theta_min = 0.5 * (-c[2]).atan2(-c[1]);
    if theta_min < 0.0 {
        theta_min += std::f64::consts::PI;
    }
    Ok(Sinusoid {
        c0: c[0],
        a: c[1],
        b: c[2],
        min: c[0] - amp,
        theta_min,
        min_stderr: var_min.sqrt(),
        r2: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
    })
}

/// Fitted decay time of one readout curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredT2 {
    pub theta: f64,
    pub t2: f64,
    pub t2_stderr: f64,
}

/// Everything measured at one generation time. `sweep` holds one set of fits
/// per fitting-window choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiInput {
    pub t_g: f64,
    pub sx0: f64,
    pub sx_tg: f64,
    pub sweep: Vec<Vec<MeasuredT2>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiPoint {
    pub t_g: f64,
    pub xi2: f64,
    /// Propagated fit uncertainty.
    pub stderr: f64,
    /// Max minus min across the window sweep.
    pub sweep_spread: f64,
    pub error: f64,
    pub theta_min: f64,
    pub sweep_values: Vec<f64>,
    pub r2: f64,
}

fn map_slope(map: &VarianceMap, t2: f64) -> f64 {
    let (lo, hi) = map.range();
    let h = 1e-4 * t2;
    let (a, b) = ((t2 - h).max(lo), (t2 + h).min(hi));
    match (map.var_at(a), map.var_at(b)) {
        (Ok(va), Ok(vb)) if b > a => (vb - va) / (b - a),
        _ => 0.0,
    }
}

/// Maps each measured `T2` to a variance ratio, minimizes over θ and applies
/// the spin-length correction `(S_x(0)/S_x(t_g))²`.
///
/// `maps` holds either one map shared by every window choice or one map per
/// entry of the sweep.
pub fn extract_xi2(maps: &[VarianceMap], inputs: &[XiInput]) -> Result<Vec<XiPoint>> {
    if maps.is_empty() {
        return invalid("no variance map given");
    }
    inputs
        .iter()
        .map(|inp| {
            if inp.sweep.is_empty() {
                return invalid("empty fitting-window sweep");
            }
            if !(inp.sx0 > 0.0 && inp.sx_tg > 0.0) {
                return Err(Error::UndefinedSqueezing(format!("non-positive spin length at t_g = {}", inp.t_g)));
            }
            let length = (inp.sx0 / inp.sx_tg).powi(2);
            let mut values = Vec::with_capacity(inp.sweep.len());
            let mut first = None;
            if maps.len() != 1 && maps.len() != inp.sweep.len() {
                return invalid(format!("{} maps for a sweep of {}", maps.len(), inp.sweep.len()));
            }
            for (i, fits) in inp.sweep.iter().enumerate() {
                let map = &maps[i.min(maps.len() - 1)];
                let theta: Vec<f64> = fits.iter().map(|f| f.theta).collect();
                let mut var = Vec::with_capacity(fits.len());
                let mut err = Vec::with_capacity(fits.len());
                for f in fits {
                    var.push(map.var_at(f.t2)?);
                    err.push(map_slope(map, f.t2).abs() * f.t2_stderr);
                }
                let use_err = if err.iter().all(|&e| e > 0.0) { err } else { Vec::new() };
                let s = sinusoid_minimum(&theta, &var, &use_err)?;
                values.push(s.min * length);
                first.get_or_insert(s);
            }
            let s = first.unwrap();
            let xi2 = values.iter().sum::<f64>() / values.len() as f64;
            let spread = values.iter().cloned().fold(f64::MIN, f64::max) - values.iter().cloned().fold(f64::MAX, f64::min);
            let stderr = s.min_stderr * length;
            Ok(XiPoint {
                t_g: inp.t_g,
                xi2,
                stderr,
                sweep_spread: spread,
                error: stderr.hypot(spread),
                theta_min: s.theta_min,
                sweep_values: values,
                r2: s.r2,
            })
        })
        .collect()
}
