//! Spin squeezing dynamics in positionally disordered dipolar ensembles.
//!
//! The crate samples spin positions in a thin layer, builds the dipolar XXZ
//! couplings, evolves collective observables with either an exact Krylov
//! engine or a cluster discrete truncated Wigner engine, and turns simulated
//! readout decays into variance maps and squeezing estimates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod dtwa;
pub mod ensemble;
pub mod error;
pub mod exact;
pub mod fit;
pub mod model;
pub mod moments;
pub mod numerics;
pub mod pipeline;
pub mod protocol;
pub mod rng;
pub mod sim;
pub mod units;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// Rotation matrix acting on spin expectation vectors under
    /// `exp(-i φ S_axis)`.
    pub fn rotation(self, angle: f64) -> [[f64; 3]; 3] {
        let (s, c) = angle.sin_cos();
        match self {
            Axis::X => [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
            Axis::Y => [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
            Axis::Z => [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        }
    }
}
