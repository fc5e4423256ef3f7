//! Physical constants and unit conventions.
//!
//! Lengths are in nanometers, times in microseconds and angular rates in
//! rad/µs. A frequency quoted in MHz converts to rad/µs by a factor of 2π.

use std::f64::consts::TAU;

/// Dipolar coupling prefactor, 2π × 52 MHz·nm³, in rad/µs·nm³.
pub const J0: f64 = TAU * 52.0;

/// Number density of carbon atoms in diamond, in nm⁻³.
pub const DIAMOND_NUMBER_DENSITY: f64 = 176.2;

/// Converts a frequency in MHz to an angular rate in rad/µs.
pub fn mhz(f: f64) -> f64 {
    TAU * f
}

/// Converts a frequency in kHz to an angular rate in rad/µs.
pub fn khz(f: f64) -> f64 {
    TAU * f * 1e-3
}

/// Areal density (nm⁻²) of a layer quoted as a ppm·nm product.
pub fn areal_density_from_ppm_nm(ppm_nm: f64, carbon_density: f64) -> f64 {
    ppm_nm * 1e-6 * carbon_density
}

/// Dipolar coupling at separation `r` (nm).
pub fn dipolar_coupling(j0: f64, r: f64) -> f64 {
    j0 / (r * r * r)
}
