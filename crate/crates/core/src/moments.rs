//! Collective spin moments and their ensemble accumulation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-member estimators of collective spin observables:
/// `S_x, S_y, S_z, S_x², S_y², S_z²` and the symmetrized products
/// `{S_y,S_z}/2, {S_x,S_y}/2, {S_x,S_z}/2`.
pub type Observables = [f64; 9];

pub const SX: usize = 0;
pub const SY: usize = 1;
pub const SZ: usize = 2;
pub const SXX: usize = 3;
pub const SYY: usize = 4;
pub const SZZ: usize = 5;
pub const SYZ: usize = 6;
pub const SXY: usize = 7;
pub const SXZ: usize = 8;

/// Ensemble-averaged raw moments with standard errors of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectiveMoments {
    pub mean: Observables,
    pub stderr: Observables,
    /// Mean number of spins per member.
    pub n_spins: f64,
    pub samples: u64,
}

impl CollectiveMoments {
    pub fn exact(obs: Observables, n_spins: usize) -> Self {
        Self { mean: obs, stderr: [0.0; 9], n_spins: n_spins as f64, samples: 1 }
    }

    pub fn sx(&self) -> f64 {
        self.mean[SX]
    }

    pub fn sy(&self) -> f64 {
        self.mean[SY]
    }

    pub fn sz(&self) -> f64 {
        self.mean[SZ]
    }

    pub fn var_y(&self) -> f64 {
        self.mean[SYY] - self.mean[SY].powi(2)
    }

    pub fn var_z(&self) -> f64 {
        self.mean[SZZ] - self.mean[SZ].powi(2)
    }

    pub fn cov_yz(&self) -> f64 {
        self.mean[SYZ] - self.mean[SY] * self.mean[SZ]
    }

    /// Variance of `S_θ = cos θ S_z + sin θ S_y`.
    pub fn var_theta(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        c * c * self.var_z() + s * s * self.var_y() + 2.0 * s * c * self.cov_yz()
    }

    /// Propagated standard error of `var_theta`, neglecting cross-covariances.
    pub fn var_theta_stderr(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let e = &self.stderr;
        ((c.powi(4) * e[SZZ].powi(2)) + (s.powi(4) * e[SYY].powi(2)) + 4.0 * (s * c * e[SYZ]).powi(2)).sqrt()
    }

    /// Minimum of `var_theta` over θ (smallest eigenvalue of the y–z covariance).
    pub fn min_variance(&self) -> f64 {
        let (a, b, c) = (self.var_z(), self.var_y(), self.cov_yz());
        0.5 * (a + b) - (0.25 * (a - b).powi(2) + c * c).sqrt()
    }

    /// Angle in `[0, π)` at which `var_theta` is minimal.
    pub fn min_angle(&self) -> f64 {
        let (a, b, c) = (self.var_z(), self.var_y(), self.cov_yz());
        let t = 0.5 * (2.0 * c).atan2(a - b) + 0.5 * std::f64::consts::PI;
        t.rem_euclid(std::f64::consts::PI)
    }

    /// `ξ² = N · min_θ Var(S_θ) / ⟨S_x⟩²`.
    pub fn squeezing_parameter(&self) -> Result<f64> {
        let sx = self.sx();
        if !(sx.abs() > 1e-12 * self.n_spins.max(1.0)) {
            return Err(Error::UndefinedSqueezing(format!("<S_x> = {sx:e} vanishes")));
        }
        Ok(self.n_spins * self.min_variance() / (sx * sx))
    }
}

impl CollectiveMoments {
    /// `min_θ Var(S_θ) / Var(S_z) · (S_x(0) / S_x)²` relative to the initial
    /// moments `initial`.
    pub fn relative_squeezing(&self, initial: &CollectiveMoments) -> Result<f64> {
        let (sx, v) = (self.sx(), self.var_z());
        if !(sx.abs() > 1e-12 * self.n_spins.max(1.0)) || !(v > 0.0) {
            return Err(Error::UndefinedSqueezing(format!("<S_x> = {sx:e}, Var(S_z) = {v:e}")));
        }
        Ok(self.min_variance() / v * (initial.sx() / sx).powi(2))
    }
}

/// Running sums of per-member observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accumulator {
    pub count: u64,
    pub spins: f64,
    pub sum: Observables,
    pub sumsq: Observables,
}

impl Default for Accumulator {
    fn default() -> Self {
        Self { count: 0, spins: 0.0, sum: [0.0; 9], sumsq: [0.0; 9] }
    }
}

impl Accumulator {
    pub fn push(&mut self, obs: &Observables, n_spins: usize) {
        self.count += 1;
        self.spins += n_spins as f64;
        for ((s, q), &o) in self.sum.iter_mut().zip(&mut self.sumsq).zip(obs.iter()) {
            *s += o;
            *q += o * o;
        }
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.count += other.count;
        self.spins += other.spins;
        for k in 0..9 {
            self.sum[k] += other.sum[k];
            self.sumsq[k] += other.sumsq[k];
        }
    }

    pub fn finish(&self) -> CollectiveMoments {
        let n = self.count.max(1) as f64;
        let mut mean = [0.0; 9];
        let mut stderr = [0.0; 9];
        for k in 0..9 {
            mean[k] = self.sum[k] / n;
            if self.count > 1 {
                let var = ((self.sumsq[k] - n * mean[k] * mean[k]) / (n - 1.0)).max(0.0);
                stderr[k] = (var / n).sqrt();
            }
        }
        CollectiveMoments { mean, stderr, n_spins: self.spins / n, samples: self.count }
    }
}

/// Merges per-chunk accumulator series pairwise in index order, so the result
/// depends only on the chunking and not on scheduling.
pub fn tree_reduce(mut parts: Vec<Vec<Accumulator>>) -> Vec<Accumulator> {
    if parts.is_empty() {
        return Vec::new();
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    x.merge(y);
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn css(n: usize) -> CollectiveMoments {
        let nf = n as f64;
        let mut m = [0.0; 9];
        m[SX] = nf / 2.0;
        m[SXX] = nf * nf / 4.0;
        m[SYY] = nf / 4.0;
        m[SZZ] = nf / 4.0;
        CollectiveMoments::exact(m, n)
    }

    #[test]
    fn css_is_unsqueezed() {
        let m = css(10);
        assert!((m.squeezing_parameter().unwrap() - 1.0).abs() < 1e-12);
        for k in 0..8 {
            assert!((m.var_theta(k as f64 * 0.4) - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn min_angle_matches_grid() {
        let mut m = css(8);
        m.mean[SYZ] = 0.9;
        m.mean[SYY] = 3.0;
        let t = m.min_angle();
        assert!((m.var_theta(t) - m.min_variance()).abs() < 1e-12);
        let grid = (0..1000).map(|k| m.var_theta(k as f64 * std::f64::consts::PI / 1000.0));
        assert!(grid.fold(f64::INFINITY, f64::min) >= m.min_variance() - 1e-12);
    }

    #[test]
    fn zero_polarization_is_undefined() {
        let mut m = css(4);
        m.mean[SX] = 0.0;
        assert!(matches!(m.squeezing_parameter(), Err(Error::UndefinedSqueezing(_))));
    }
}
