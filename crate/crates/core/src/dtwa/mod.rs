//! Cluster discrete truncated Wigner approximation.
//!
//! Spins are grouped into clusters of at most two by greedy matching on the
//! coupling strength. Each trajectory carries one-body means for every spin
//! and the nine two-body correlators of every pair cluster. Dynamics inside a
//! pair is treated exactly; clusters interact through mean fields of the
//! other clusters' one-body means.

mod cluster;
mod system;

pub use cluster::{build_clusters, build_clusters_weighted, ClusterPartition};
pub use system::{DtwaParams, DtwaPropagator, Trajectory};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::SpinModel;
use crate::moments::CollectiveMoments;
use crate::sim::{sample_series, Initial, Propagator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtwaSeries {
    pub times: Vec<f64>,
    pub moments: Vec<CollectiveMoments>,
}

/// Samples `init.members` trajectories and records collective moments at `times`.
pub fn run_dtwa(model: &SpinModel, params: &DtwaParams, init: &Initial, times: &[f64], seed: u64) -> Result<DtwaSeries> {
    let p = DtwaPropagator::new(model, params)?;
    let members = p.members(init, seed)?;
    let acc = sample_series(&p, &members, times)?;
    Ok(DtwaSeries { times: times.to_vec(), moments: acc.iter().map(|a| a.finish()).collect() })
}
