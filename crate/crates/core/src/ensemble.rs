//! Random spin ensembles in a thin layer.
//!
//! Spins are placed by a Poisson point process in a box of lateral size
//! `lx × ly` and thickness `d` with open boundaries. Each spin carries a status
//! that removal models (shelving, depolarization, hard cutoff) update.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::model::CouplingGraph;
use crate::rng::{stream, tag};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinStatus {
    Active,
    Shelved,
    Depolarized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerBox {
    pub lx: f64,
    pub ly: f64,
    pub thickness: f64,
}

impl LayerBox {
    pub fn square(area: f64, thickness: f64) -> Self {
        let l = area.sqrt();
        Self { lx: l, ly: l, thickness }
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn center(&self) -> [f64; 3] {
        [0.5 * self.lx, 0.5 * self.ly, 0.5 * self.thickness]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinEnsemble {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(rename = "box")]
    pub layer: LayerBox,
    /// Areal density in nm⁻².
    pub density: f64,
    pub positions: Vec<[f64; 3]>,
    pub status: Vec<SpinStatus>,
}

impl SpinEnsemble {
    pub fn from_positions(positions: Vec<[f64; 3]>, layer: LayerBox, density: f64) -> Self {
        let status = vec![SpinStatus::Active; positions.len()];
        Self { schema_version: SCHEMA_VERSION, seed: 0, layer, density, positions, status }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.status[i] == SpinStatus::Active).collect()
    }

    pub fn n_active(&self) -> usize {
        self.status.iter().filter(|s| **s == SpinStatus::Active).count()
    }

    /// Distance from each active spin to its nearest active neighbor
    /// (infinite for an isolated spin), indexed like `active_indices`.
    pub fn nn_distances(&self) -> Vec<f64> {
        let act = self.active_indices();
        act.iter()
            .map(|&i| {
                act.iter()
                    .filter(|&&j| j != i)
                    .map(|&j| distance(&self.positions[i], &self.positions[j]))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// Keeps the `n` active spins closest to the box center and marks the rest
    /// shelved. Used to obtain a fixed active count from an oversized sample.
    pub fn keep_central(&mut self, n: usize) -> Result<()> {
        let mut act = self.active_indices();
        if act.len() < n {
            return Err(Error::InvalidGeometry(format!(
                "only {} active spins available, {n} requested",
                act.len()
            )));
        }
        let c = self.layer.center();
        let d2 = |i: usize| {
            let p = self.positions[i];
            (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)
        };
        act.sort_by(|&a, &b| d2(a).total_cmp(&d2(b)).then(a.cmp(&b)));
        for &i in &act[n..] {
            self.status[i] = SpinStatus::Shelved;
        }
        Ok(())
    }

    /// A new ensemble holding only the active spins.
    pub fn compacted(&self) -> Self {
        let act = self.active_indices();
        Self {
            schema_version: self.schema_version,
            seed: self.seed,
            layer: self.layer,
            density: self.density,
            positions: act.iter().map(|&i| self.positions[i]).collect(),
            status: vec![SpinStatus::Active; act.len()],
        }
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Samples a Poisson number of spins with mean `density · lx · ly`, placed
/// uniformly in the box.
pub fn sample_positions(density: f64, layer: LayerBox, seed: u64) -> Result<SpinEnsemble> {
    if !(density >= 0.0) || !density.is_finite() {
        return invalid(format!("density must be non-negative, got {density}"));
    }
    if !(layer.lx > 0.0 && layer.ly > 0.0) || !(layer.thickness >= 0.0) {
        return invalid(format!("box must have positive area and non-negative thickness, got {layer:?}"));
    }
    let mut rng = stream(seed, &[tag::POSITIONS]);
    let mean = density * layer.area();
    let n = if mean == 0.0 {
        0
    } else {
        Poisson::new(mean)
            .map_err(|e| Error::InvalidArgument(format!("poisson mean {mean}: {e}")))?
            .sample(&mut rng) as usize
    };
    let positions = (0..n)
        .map(|_| {
            [
                rng.gen::<f64>() * layer.lx,
                rng.gen::<f64>() * layer.ly,
                rng.gen::<f64>() * layer.thickness,
            ]
        })
        .collect();
    let mut e = SpinEnsemble::from_positions(positions, layer, density);
    e.seed = seed;
    Ok(e)
}

/// Samples exactly `n` spins uniformly in a square box of area `n / density`.
pub fn sample_fixed_count(n: usize, density: f64, thickness: f64, seed: u64) -> Result<SpinEnsemble> {
    if n == 0 || !(density > 0.0) {
        return invalid("fixed-count ensemble needs n > 0 and positive density");
    }
    let layer = LayerBox::square(n as f64 / density, thickness);
    let mut rng = stream(seed, &[tag::POSITIONS]);
    let positions = (0..n)
        .map(|_| {
            [
                rng.gen::<f64>() * layer.lx,
                rng.gen::<f64>() * layer.ly,
                rng.gen::<f64>() * layer.thickness,
            ]
        })
        .collect();
    let mut e = SpinEnsemble::from_positions(positions, layer, density);
    e.seed = seed;
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    #[serde(rename = "2d")]
    Two,
    #[serde(rename = "3d")]
    Three,
}

/// Nearest-neighbor distance density for a Poisson process of density `n`
/// (nm⁻² in two dimensions, nm⁻³ in three).
pub fn nn_distance_pdf(r: f64, n: f64, dim: Dimension) -> Result<f64> {
    if !(r >= 0.0) {
        return invalid(format!("distance must be non-negative, got {r}"));
    }
    if !(n > 0.0) {
        return invalid(format!("density must be positive, got {n}"));
    }
    Ok(match dim {
        Dimension::Two => 2.0 * PI * r * n * (-PI * r * r * n).exp(),
        Dimension::Three => 4.0 * PI * r * r * n * (-4.0 / 3.0 * PI * r * r * r * n).exp(),
    })
}

/// Probability that a spin with nearest-neighbor coupling `j` is shelved by a
/// π pulse of Rabi frequency `omega` (both in rad/µs).
pub fn shelving_probability(j: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return invalid(format!("Rabi frequency must be positive, got {omega}"));
    }
    if !(j >= 0.0) {
        return invalid(format!("coupling must be non-negative, got {j}"));
    }
    if omega.is_infinite() {
        return Ok(1.0);
    }
    let q = j / omega;
    let stay = (1.0 / (1.0 + q * q)) * (0.5 * PI * (q * q + 1.0).sqrt()).sin().powi(2);
    Ok(1.0 - stay)
}

/// Probability that a spin whose nearest neighbor sits at `r_nn` is lost to
/// the spin-lock depolarization step with characteristic radius `r_depol`.
pub fn depolarization_probability(r_nn: f64, r_depol: f64) -> Result<f64> {
    if !(r_nn > 0.0) {
        return invalid(format!("nearest-neighbor distance must be positive, got {r_nn}"));
    }
    if !(r_depol >= 0.0) {
        return invalid(format!("depolarization radius must be non-negative, got {r_depol}"));
    }
    if r_depol == 0.0 || r_nn.is_infinite() {
        return Ok(0.0);
    }
    let x = (r_nn / r_depol).powi(3);
    if x > 1e6 {
        return Ok(0.0);
    }
    let root = (1.0 + 4.0 * x * x).sqrt();
    let s = 4.0 * x * x / (root + 1.0);
    let kept = 4.0 * x * s / (4.0 * x * x + s * s);
    Ok((1.0 - kept).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RemovalModel {
    /// Probabilistic shelving with Rabi frequency `J0 / r_shelve³`, each spin
    /// detuned by its nearest-neighbor coupling `J0 / r_nn³`.
    Shelving { r_shelve: f64 },
    /// Probabilistic loss of strongly coupled spins during the spin lock.
    Depolarization { r_depol: f64 },
    /// Deterministic removal of every spin with a neighbor closer than `r_min`.
    HardCutoff { r_min: f64 },
}

/// Applies a removal model to the active spins. `coupling` must be built from
/// the current active set of `ensemble`.
pub fn apply_removal(
    ensemble: &SpinEnsemble,
    model: RemovalModel,
    coupling: &CouplingGraph,
    seed: u64,
) -> Result<SpinEnsemble> {
    let act = ensemble.active_indices();
    if coupling.spin_indices() != act.as_slice() {
        return invalid("coupling graph does not match the ensemble's active spins");
    }
    let mut out = ensemble.clone();
    let mut rng = stream(seed, &[tag::REMOVAL]);
    match model {
        RemovalModel::Shelving { r_shelve } => {
            if !(r_shelve >= 0.0) {
                return invalid(format!("shelving radius must be non-negative, got {r_shelve}"));
            }
            if r_shelve == 0.0 {
                return Ok(out);
            }
            let omega = coupling.j0() / r_shelve.powi(3);
            let nn = ensemble.nn_distances();
            for (k, &i) in act.iter().enumerate() {
                let p = shelving_probability(coupling.j0() / nn[k].powi(3), omega)?;
                if rng.gen::<f64>() < p {
                    out.status[i] = SpinStatus::Shelved;
                }
            }
        }
        RemovalModel::Depolarization { r_depol } => {
            if !(r_depol >= 0.0) {
                return invalid(format!("depolarization radius must be non-negative, got {r_depol}"));
            }
            let nn = ensemble.nn_distances();
            for (k, &i) in act.iter().enumerate() {
                let p = depolarization_probability(nn[k], r_depol)?;
                if rng.gen::<f64>() < p {
                    out.status[i] = SpinStatus::Depolarized;
                }
            }
        }
        RemovalModel::HardCutoff { r_min } => {
            if !(r_min >= 0.0) {
                return invalid(format!("cutoff radius must be non-negative, got {r_min}"));
            }
            let nn = ensemble.nn_distances();
            for (k, &i) in act.iter().enumerate() {
                if nn[k] < r_min {
                    out.status[i] = SpinStatus::Shelved;
                }
            }
        }
    }
    Ok(out)
}
