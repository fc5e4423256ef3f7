//! Couplings and Hamiltonian descriptions shared by both engines.
//!
//! The dipolar XXZ Hamiltonian is
//! `H = -Σ_{i<j} J_ij (s_x^i s_x^j + s_y^i s_y^j - s_z^i s_z^j)` with
//! `J_ij = J0 / r_ij³`, summed over unordered pairs of active spins.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::ensemble::{distance, SpinEnsemble};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingGraph {
    j0: f64,
    indices: Vec<usize>,
    n: usize,
    j: Vec<f64>,
    local: Vec<f64>,
}

impl CouplingGraph {
    /// Builds `J_ij = j0 / r_ij³` over the active spins of `ensemble`.
    pub fn build(ensemble: &SpinEnsemble, j0: f64) -> Result<Self> {
        let indices = ensemble.active_indices();
        if indices.is_empty() {
            return invalid("coupling graph needs at least one active spin");
        }
        let n = indices.len();
        let mut j = vec![0.0; n * n];
        for a in 0..n {
            for b in a + 1..n {
                let r = distance(&ensemble.positions[indices[a]], &ensemble.positions[indices[b]]);
                if !(r > 1e-9) {
                    return Err(Error::InvalidGeometry(format!(
                        "spins {} and {} coincide",
                        indices[a], indices[b]
                    )));
                }
                let v = j0 / (r * r * r);
                j[a * n + b] = v;
                j[b * n + a] = v;
            }
        }
        Ok(Self::assemble(j0, indices, n, j))
    }

    /// Builds a graph from an explicit symmetric coupling matrix.
    pub fn from_matrix(j0: f64, n: usize, j: Vec<f64>) -> Result<Self> {
        if n == 0 || j.len() != n * n {
            return invalid("coupling matrix must be n×n with n > 0");
        }
        for a in 0..n {
            if j[a * n + a] != 0.0 {
                return invalid("coupling matrix must have a zero diagonal");
            }
            for b in 0..a {
                if j[a * n + b] != j[b * n + a] {
                    return invalid("coupling matrix must be symmetric");
                }
            }
        }
        Ok(Self::assemble(j0, (0..n).collect(), n, j))
    }

    fn assemble(j0: f64, indices: Vec<usize>, n: usize, j: Vec<f64>) -> Self {
        let local = (0..n).map(|a| j[a * n..(a + 1) * n].iter().sum()).collect();
        Self { j0, indices, n, j, local }
    }

    pub fn j0(&self) -> f64 {
        self.j0
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Ensemble indices of the spins, in graph order.
    pub fn spin_indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.j[a * self.n + b]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.j
    }

    /// `J_i = Σ_j J_ij`.
    pub fn local_coupling(&self, a: usize) -> f64 {
        self.local[a]
    }

    pub fn local_couplings(&self) -> &[f64] {
        &self.local
    }

    pub fn max_coupling(&self) -> f64 {
        self.j.iter().cloned().fold(0.0, f64::max)
    }
}

/// Normalized histogram of local couplings `J_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingHistogram {
    pub centers: Vec<f64>,
    pub width: f64,
    /// Probability mass per bin; sums to one.
    pub probability: Vec<f64>,
    /// Exact mean of the `J_i`, not the binned estimate.
    pub mean: f64,
}

impl CouplingHistogram {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("J_bin_center,probability\n");
        for (c, p) in self.centers.iter().zip(&self.probability) {
            s.push_str(&format!("{c:.10e},{p:.10e}\n"));
        }
        s
    }
}

pub fn coupling_distribution(graph: &CouplingGraph, bins: usize) -> Result<CouplingHistogram> {
    if bins == 0 {
        return invalid("histogram needs at least one bin");
    }
    let vals = graph.local_couplings();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 1e-12 * hi.abs().max(1e-300) {
        return Ok(CouplingHistogram { centers: vec![mean], width: 0.0, probability: vec![1.0], mean });
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in vals {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let total = vals.len() as f64;
    Ok(CouplingHistogram {
        centers: (0..bins).map(|k| lo + (k as f64 + 0.5) * width).collect(),
        width,
        probability: counts.iter().map(|&c| c as f64 / total).collect(),
        mean,
    })
}

/// Mean-field twisting rate: the mean of the local couplings,
/// `(2/N) Σ_{i<j} J_ij`. A state tipped by θ above the equator precesses with
/// `S_y/S_x ≈ χ t sin θ` at early times.
pub fn mean_field_chi(graph: &CouplingGraph) -> f64 {
    graph.local_couplings().iter().sum::<f64>() / graph.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianTerm {
    /// Dipolar XXZ interaction over a coupling graph.
    Xxz(Arc<CouplingGraph>),
    /// One-axis twisting `χ S_z²` on `n` spins.
    Oat { chi: f64, n: usize },
    /// Isolated dimer `-J(s_x s_x + s_y s_y - s_z s_z)`.
    Dimer { j: f64 },
    /// Uniform transverse field `h S_x`.
    TransverseField { h: f64 },
}

/// Weighted sum of Hamiltonian terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HamiltonianSpec {
    pub terms: Vec<(f64, HamiltonianTerm)>,
}

impl HamiltonianSpec {
    pub fn xxz(graph: Arc<CouplingGraph>) -> Self {
        Self { terms: vec![(1.0, HamiltonianTerm::Xxz(graph))] }
    }

    pub fn oat(chi: f64, n: usize) -> Self {
        Self { terms: vec![(1.0, HamiltonianTerm::Oat { chi, n })] }
    }

    pub fn dimer(j: f64) -> Self {
        Self { terms: vec![(1.0, HamiltonianTerm::Dimer { j })] }
    }

    pub fn plus(mut self, weight: f64, term: HamiltonianTerm) -> Self {
        self.terms.push((weight, term));
        self
    }

    pub fn n_spins(&self) -> Result<usize> {
        let mut n = None;
        for (_, t) in &self.terms {
            let m = match t {
                HamiltonianTerm::Xxz(g) => Some(g.len()),
                HamiltonianTerm::Oat { n, .. } => Some(*n),
                HamiltonianTerm::Dimer { .. } => Some(2),
                HamiltonianTerm::TransverseField { .. } => None,
            };
            match (n, m) {
                (None, m) => n = m,
                (Some(a), Some(b)) if a != b => {
                    return invalid(format!("terms act on different spin counts ({a} and {b})"))
                }
                _ => {}
            }
        }
        n.ok_or_else(|| Error::InvalidArgument("Hamiltonian has no interaction term".into()))
    }

    /// Lowers the description to pairwise XXZ couplings plus a uniform field.
    pub fn lower(&self) -> Result<SpinModel> {
        let n = self.n_spins()?;
        let mut m = SpinModel { n, xy: vec![0.0; n * n], zz: vec![0.0; n * n], field_x: 0.0 };
        for (w, t) in &self.terms {
            if !w.is_finite() {
                return invalid("term weights must be finite");
            }
            match t {
                HamiltonianTerm::Xxz(g) => {
                    for (k, &v) in g.matrix().iter().enumerate() {
                        m.xy[k] -= w * v;
                        m.zz[k] += w * v;
                    }
                }
                HamiltonianTerm::Oat { chi, .. } => {
                    for a in 0..n {
                        for b in 0..n {
                            if a != b {
                                m.zz[a * n + b] += 2.0 * w * chi;
                            }
                        }
                    }
                }
                HamiltonianTerm::Dimer { j } => {
                    for k in [1, 2] {
                        m.xy[k] -= w * j;
                        m.zz[k] += w * j;
                    }
                }
                HamiltonianTerm::TransverseField { h } => m.field_x += w * h,
            }
        }
        Ok(m)
    }
}

/// `H = Σ_{i<j} [xy_ij (s_x s_x + s_y s_y) + zz_ij s_z s_z] + field_x S_x`,
/// with symmetric dense matrices and constant energy offsets dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinModel {
    pub n: usize,
    pub xy: Vec<f64>,
    pub zz: Vec<f64>,
    pub field_x: f64,
}

impl SpinModel {
    /// Largest coupling or field magnitude; sets the integration time scale.
    pub fn rate_scale(&self) -> f64 {
        let c = self.xy.iter().chain(&self.zz).fold(0.0f64, |a, &b| a.max(b.abs()));
        c.max(self.field_x.abs())
    }

    pub fn with_field(&self, h: f64) -> Self {
        let mut m = self.clone();
        m.field_x = h;
        m
    }
}
