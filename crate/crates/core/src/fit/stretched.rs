//! Weighted fits of `A exp(-(t/T2)^p)` to a family of curves sharing `p`.
//!
//! For a given `p` each curve is fit separately: a log-linear solve gives the
//! starting point and damped Gauss–Newton refines `(A, T2)`. The shared `p` is
//! found by golden-section search on the summed χ².

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fit::DecayCurve;
use crate::numerics::optimize::golden_section;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WindowStart {
    Fixed { t: f64 },
    /// Each curve starts at its own generation time.
    GenerationTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub start: WindowStart,
    pub t_max: f64,
}

impl FitWindow {
    pub fn fixed(t_min: f64, t_max: f64) -> Self {
        Self { start: WindowStart::Fixed { t: t_min }, t_max }
    }

    fn t_min(&self, c: &DecayCurve) -> f64 {
        match self.start {
            WindowStart::Fixed { t } => t,
            WindowStart::GenerationTime => c.t_g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PMode {
    Fixed { p: f64 },
    Global { lo: f64, hi: f64 },
}

impl Default for PMode {
    fn default() -> Self {
        PMode::Global { lo: 0.3, hi: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub t_g: f64,
    pub theta: f64,
    pub amplitude: f64,
    pub t2: f64,
    pub amplitude_stderr: f64,
    pub t2_stderr: f64,
    pub chi2: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub p: f64,
    pub p_stderr: f64,
    pub curves: Vec<CurveFit>,
    pub chi2: f64,
    /// Parameter covariance ordered `[A_0, T2_0, A_1, T2_1, ..., p]`.
    pub covariance: Vec<Vec<f64>>,
}

struct Data {
    t: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    weighted: bool,
}

fn window_data(c: &DecayCurve, win: &FitWindow) -> Result<Data> {
    let lo = win.t_min(c);
    let weighted = c.stderr.iter().all(|&s| s > 0.0);
    let mut d = Data { t: vec![], y: vec![], w: vec![], weighted };
    for k in 0..c.t.len() {
        let t = c.t[k];
        if t >= lo - 1e-12 && t <= win.t_max + 1e-12 && t >= 0.0 {
            d.t.push(t);
            d.y.push(c.y[k]);
            d.w.push(if weighted { 1.0 / (c.stderr[k] * c.stderr[k]) } else { 1.0 });
        }
    }
    if d.t.len() < 4 {
        return Err(Error::Fit(format!(
            "curve (t_g = {}, θ = {}) has {} points in the window",
            c.t_g,
            c.theta,
            d.t.len()
        )));
    }
    Ok(d)
}

fn model(a: f64, t2: f64, p: f64, t: f64) -> (f64, f64, f64, f64) {
    let u = (t / t2).powf(p);
    let e = (-u).exp();
    let f = a * e;
    // ∂f/∂A, ∂f/∂T2, ∂f/∂p
    let dp = if t > 0.0 { -f * u * (t / t2).ln() } else { 0.0 };
    (f, e, f * u * p / t2, dp)
}

fn chi2(d: &Data, a: f64, t2: f64, p: f64) -> f64 {
    d.t.iter()
        .zip(&d.y)
        .zip(&d.w)
        .map(|((&t, &y), &w)| w * (y - model(a, t2, p, t).0).powi(2))
        .sum()
}

/// Best `(A, T2, χ²)` for one curve at fixed `p`.
fn fit_one(d: &Data, p: f64) -> Result<(f64, f64, f64)> {
    // log-linear start: ln y = ln A - T2^{-p} t^p
    let (mut s0, mut s1, mut s11, mut sy, mut s1y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..d.t.len() {
        if d.y[k] > 0.0 {
            let w = d.w[k] * d.y[k] * d.y[k];
            let x = d.t[k].powf(p);
            let ly = d.y[k].ln();
            s0 += w;
            s1 += w * x;
            s11 += w * x * x;
            sy += w * ly;
            s1y += w * x * ly;
        }
    }
    let det = s0 * s11 - s1 * s1;
    let (mut a, mut t2) = if det.abs() > 1e-300 {
        let c0 = (s11 * sy - s1 * s1y) / det;
        let c1 = -(s0 * s1y - s1 * sy) / det;
        let tmax = d.t.iter().cloned().fold(0.0, f64::max).max(1e-12);
        let t2 = if c1 > 0.0 { c1.powf(-1.0 / p) } else { 10.0 * tmax };
        (c0.exp(), t2)
    } else {
        (d.y.iter().cloned().fold(0.0, f64::max), d.t.iter().cloned().fold(1.0, f64::max))
    };
    let mut cur = chi2(d, a, t2, p);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for k in 0..d.t.len() {
            let (f, da, dt2, _) = model(a, t2, p, d.t[k]);
            let r = d.y[k] - f;
            let w = d.w[k];
            jtj[0][0] += w * da * da;
            jtj[0][1] += w * da * dt2;
            jtj[1][1] += w * dt2 * dt2;
            jtr[0] += w * da * r;
            jtr[1] += w * dt2 * r;
        }
        jtj[1][0] = jtj[0][1];
        let mut improved = false;
        for _ in 0..30 {
            let m00 = jtj[0][0] * (1.0 + lambda);
            let m11 = jtj[1][1] * (1.0 + lambda);
            let det = m00 * m11 - jtj[0][1] * jtj[1][0];
            if det.abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let da = (m11 * jtr[0] - jtj[0][1] * jtr[1]) / det;
            let dt = (m00 * jtr[1] - jtj[1][0] * jtr[0]) / det;
            let (na, nt) = (a + da, t2 + dt);
            if nt > 0.0 {
                let c = chi2(d, na, nt, p);
                if c <= cur {
                    let done = (cur - c) <= 1e-15 * cur.max(1e-300) || (da.abs() <= 1e-14 * a.abs() && dt.abs() <= 1e-14 * t2);
                    a = na;
                    t2 = nt;
                    cur = c;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = true;
                    if done {
                        return Ok((a, t2, cur));
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    if !(t2.is_finite() && a.is_finite()) {
        return Err(Error::Fit("stretched-exponential fit diverged".into()));
    }
    Ok((a, t2, cur))
}

/// Fits every curve with its own `(A, T2)` and a shared stretch power `p`.
pub fn fit_stretched(curves: &[DecayCurve], window: &FitWindow, p_mode: PMode) -> Result<FitResult> {
    if curves.is_empty() {
        return invalid("no curves to fit");
    }
    let data: Vec<Data> = curves.iter().map(|c| window_data(c, window)).collect::<Result<_>>()?;
    let total = |p: f64| -> f64 {
        data.iter()
            .map(|d| fit_one(d, p).map(|r| r.2).unwrap_or(f64::INFINITY))
            .sum()
    };
    let p = match p_mode {
        PMode::Fixed { p } => {
            if !(p > 0.0) {
                return invalid("stretch power must be positive");
            }
            p
        }
        PMode::Global { lo, hi } => {
            if !(0.0 < lo && lo < hi) {
                return invalid("invalid stretch power bounds");
            }
            golden_section(total, lo, hi, 1e-10).0
        }
    };
    let fits: Vec<(f64, f64, f64)> = data.iter().map(|d| fit_one(d, p)).collect::<Result<_>>()?;
    let chi2_total: f64 = fits.iter().map(|f| f.2).sum();

    // Covariance from the weighted Jacobian at the optimum.
    let k = fits.len();
    let global = matches!(p_mode, PMode::Global { .. });
    let np = 2 * k + usize::from(global);
    let mut jtj = DMatrix::<f64>::zeros(np, np);
    let mut n_points = 0usize;
    let mut weighted = true;
    for (c, (d, f)) in data.iter().zip(&fits).enumerate() {
        weighted &= d.weighted;
        for i in 0..d.t.len() {
            let (_, da, dt2, dp) = model(f.0, f.1, p, d.t[i]);
            let mut row = vec![(2 * c, da), (2 * c + 1, dt2)];
            if global {
                row.push((2 * k, dp));
            }
            for &(a, va) in &row {
                for &(b, vb) in &row {
                    jtj[(a, b)] += d.w[i] * va * vb;
                }
            }
            n_points += 1;
        }
    }
    let scale = if weighted { 1.0 } else { chi2_total / (n_points.saturating_sub(np)).max(1) as f64 };
    let cov = jtj
        .clone()
        .try_inverse()
        .or_else(|| jtj.pseudo_inverse(1e-300).ok())
        .unwrap_or_else(|| DMatrix::from_element(np, np, f64::NAN))
        * scale;
    let sd = |i: usize| cov[(i, i)].max(0.0).sqrt();
    let curves_out = curves
        .iter()
        .zip(&fits)
        .zip(&data)
        .enumerate()
        .map(|(i, ((c, f), d))| CurveFit {
            t_g: c.t_g,
            theta: c.theta,
            amplitude: f.0,
            t2: f.1,
            amplitude_stderr: sd(2 * i),
            t2_stderr: sd(2 * i + 1),
            chi2: f.2,
            points: d.t.len(),
        })
        .collect();
    Ok(FitResult {
        p,
        p_stderr: if global { sd(2 * k) } else { 0.0 },
        curves: curves_out,
        chi2: chi2_total,
        covariance: (0..np).map(|i| (0..np).map(|j| cov[(i, j)]).collect()).collect(),
    })
}
