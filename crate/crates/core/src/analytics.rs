//! Closed-form and semi-analytic results used as oracles and by the
//! extraction pipeline.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::numerics::optimize::bisect;
use crate::numerics::special::{expint_scaled, gamma};

pub use crate::ensemble::{depolarization_probability, nn_distance_pdf, shelving_probability, Dimension};

/// Gaussian readout decay of a one-axis twisted state under `H = χ S_z²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OatGaussian {
    pub chi: f64,
    pub var_sz: f64,
    /// Length of the collective spin in the x–y plane.
    pub length: f64,
    /// Symmetrized correlator `⟨S_y S_z⟩` at the start of the readout.
    pub syz: f64,
}

impl OatGaussian {
    fn check(&self) -> Result<()> {
        if !(self.var_sz > 0.0) {
            return invalid(format!("Var(S_z) must be positive, got {}", self.var_sz));
        }
        if self.chi == 0.0 || !self.chi.is_finite() {
            return invalid("twisting strength must be non-zero");
        }
        if !(self.length > 0.0) {
            return invalid("spin length must be positive");
        }
        Ok(())
    }

    pub fn offset_time(&self) -> Result<f64> {
        self.check()?;
        Ok(-self.syz / (2.0 * self.chi * self.var_sz * self.length))
    }

    pub fn t2(&self) -> Result<f64> {
        self.check()?;
        Ok(1.0 / (2f64.sqrt() * self.chi.abs() * self.var_sz.sqrt()))
    }

    /// `⟨S_x(t_r)⟩ = L exp(-2χ² Var(S_z) (t_r - t_o)²)`.
    pub fn sx(&self, t_r: f64) -> Result<f64> {
        let t_o = self.offset_time()?;
        Ok(self.length * (-2.0 * self.chi * self.chi * self.var_sz * (t_r - t_o).powi(2)).exp())
    }
}

/// Convenience wrapper around [`OatGaussian::sx`].
pub fn oat_decay(params: &OatGaussian, t_r: f64) -> Result<f64> {
    params.sx(t_r)
}

/// Readout offset time after generation for `t_g` and rotation by θ, for a
/// twisting rate `chi` (`S_y/S_x ≈ χ t sin θ`).
pub fn offset_time(theta: f64, chi: f64, t_g: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let a = chi * t_g;
    let num = c * c - s * s + s * c * a;
    let den = c * c + s * s * (1.0 + a * a) + 2.0 * s * c * a;
    -t_g * num / den
}

/// Twisting rate from the early-time slope of `S_y/S_x` for a state tipped by
/// θ. Points with `|S_y/S_x| ≥ 0.2` or `t ≤ 0` are ignored.
pub fn chi_from_twisting(times: &[f64], ratios: &[f64], theta: f64) -> Result<f64> {
    if times.len() != ratios.len() {
        return invalid("times and ratios differ in length");
    }
    let s = theta.sin();
    if s.abs() < 1e-9 {
        return invalid("tip angle must have a non-zero sine");
    }
    let (mut tt, mut tr, mut used) = (0.0, 0.0, 0);
    for (&t, &r) in times.iter().zip(ratios) {
        if t > 0.0 && r.abs() < 0.2 && r.is_finite() {
            tt += t * t;
            tr += t * r;
            used += 1;
        }
    }
    if used < 3 {
        return Err(Error::Fit(format!("only {used} early-time points with |S_y/S_x| < 0.2")));
    }
    Ok(tr / tt / s)
}

/// Collective `(⟨S_x⟩, ⟨S_y⟩)` of an isolated dimer with coupling `j` after
/// the polarized state is rotated about `+y` by `phi_o`.
pub fn dimer_twisting(phi_o: f64, j: f64, t: f64) -> (f64, f64) {
    let (s, c) = phi_o.sin_cos();
    let (sj, cj) = (j * t).sin_cos();
    (c * cj, -s * c * sj)
}

/// Collective `⟨S_x⟩` of an isolated dimer after generation for `t_g`,
/// rotation by θ about x, and readout for `t_r`.
pub fn dimer_readout(theta: f64, j: f64, t_g: f64, t_r: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    s * s * (j * (t_g - t_r)).cos() + c * c * (j * (t_g + t_r)).cos()
}

/// Collective `⟨S_x⟩` of a dimer adiabatically dressed by a transverse field
/// `h`, to first order in `j/h`.
pub fn adiabatic_dimer_polarization(j: f64, h: f64) -> Result<f64> {
    if h == 0.0 {
        return invalid("transverse field must be non-zero");
    }
    let e = j / (4.0 * h);
    Ok((1.0 - e * e) / (1.0 + e * e))
}

/// Transverse field during the adiabatic ramp, `h(t) = h0 / sqrt(1 + h0² k t)`.
pub fn ramp_field(h0: f64, k: f64, t: f64) -> f64 {
    h0 / (1.0 + h0 * h0 * k * t).sqrt()
}

/// Early-time decay of a 2D layer with minimum pair separation `r_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossover {
    /// Areal density in nm⁻².
    pub density: f64,
    pub r_min: f64,
    pub j0: f64,
}

const M: f64 = 4.0 / 3.0;

impl Crossover {
    fn check(&self) -> Result<()> {
        if !(self.density > 0.0) || !(self.r_min >= 0.0) || !(self.j0 > 0.0) {
            return invalid(format!("invalid crossover parameters {self:?}"));
        }
        Ok(())
    }

    fn x(&self, t: f64) -> f64 {
        (self.j0 * t).powi(2) / (8.0 * self.r_min.powi(6))
    }

    /// `h(x) = E_{4/3}(x) - 3 - Γ(-1/3) x^{1/3}` and its derivative.
    fn h(x: f64) -> Result<(f64, f64)> {
        let g = gamma(-1.0 / 3.0)?;
        if x < 1.0 {
            let (mut h, mut dh) = (0.0, 0.0);
            let mut term = 1.0; // (-x)^{k-1}/(k-1)!
            for k in 1..200 {
                let kf = k as f64;
                dh += term / (kf - 1.0 / 3.0);
                let tk = term * (-x) / kf;
                h -= tk / (kf - 1.0 / 3.0);
                term = tk;
                if term.abs() < 1e-18 {
                    break;
                }
            }
            Ok((h, dh))
        } else {
            let e43 = expint_scaled(M, x)? * (-x).exp();
            let e13 = expint_scaled(1.0 / 3.0, x)? * (-x).exp();
            Ok((e43 - 3.0 - g * x.cbrt(), -e13 - g / (3.0 * x.powf(2.0 / 3.0))))
        }
    }

    /// `-ln ⟨S_x(t)⟩`.
    pub fn decay_exponent(&self, t: f64) -> Result<f64> {
        self.check()?;
        if t == 0.0 {
            return Ok(0.0);
        }
        let t = t.abs();
        let pref = 2.0 * PI * self.density;
        if self.r_min == 0.0 {
            let chi13 = (self.j0 * t).powf(2.0 / 3.0);
            return Ok(-pref * chi13 * gamma(-1.0 / 3.0)? / 12.0);
        }
        let (h, _) = Self::h(self.x(t))?;
        Ok(pref * self.r_min * self.r_min / 6.0 * h)
    }

    pub fn sx(&self, t: f64) -> Result<f64> {
        Ok((-self.decay_exponent(t)?).exp())
    }

    /// Local stretch exponent `d ln(-ln S_x) / d ln t`.
    pub fn local_exponent(&self, t: f64) -> Result<f64> {
        self.check()?;
        if !(t > 0.0) {
            return invalid("local exponent needs t > 0");
        }
        if self.r_min == 0.0 {
            return Ok(2.0 / 3.0);
        }
        let x = self.x(t);
        let (h, dh) = Self::h(x)?;
        Ok(2.0 * x * dh / h)
    }

    /// Time at which the local exponent crosses `4/3`.
    pub fn crossover_time(&self) -> Result<f64> {
        self.check()?;
        if self.r_min == 0.0 {
            return invalid("no crossover without a minimum distance");
        }
        let f = |lx: f64| {
            let x: f64 = lx.exp();
            match Self::h(x) {
                Ok((h, dh)) => 2.0 * x * dh / h - 4.0 / 3.0,
                Err(_) => f64::NAN,
            }
        };
        let lx = bisect(f, (1e-8f64).ln(), (1e8f64).ln(), 1e-12)?;
        Ok((8.0 * lx.exp()).sqrt() * self.r_min.powi(3) / self.j0)
    }
}

/// `⟨S_x(t)⟩` from the crossover law.
pub fn crossover_sx(params: &Crossover, t: f64) -> Result<f64> {
    params.sx(t)
}
