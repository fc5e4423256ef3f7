//! Engine-agnostic interface used by the experiment protocols.
//!
//! A propagator owns one fixed Hamiltonian (one disorder realization) and
//! evolves a population of members: sampled pure states for the exact engine,
//! phase-space trajectories for DTWA. Ensemble averages are formed by
//! accumulating per-member observables in fixed-size chunks and merging the
//! chunks in index order.

use rayon::prelude::*;

use crate::error::Result;
use crate::moments::{tree_reduce, Accumulator, Observables};
use crate::Axis;

/// Members per accumulation chunk. Fixed so that results do not depend on the
/// number of worker threads.
pub const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Initial {
    /// Polarization along `+x`.
    pub eta: f64,
    /// Number of members to sample.
    pub members: usize,
    /// Optional global rotation applied after preparation.
    pub tip: Option<(Axis, f64)>,
}

impl Initial {
    pub fn polarized(eta: f64, members: usize) -> Self {
        Self { eta, members, tip: None }
    }
}

pub trait Propagator: Sync + Sized {
    type Member: Clone + Send + Sync;

    fn n_spins(&self) -> usize;

    fn members(&self, init: &Initial, seed: u64) -> Result<Vec<Self::Member>>;

    /// Evolves through the offsets `times` from the member's current time,
    /// calling `visit` at each. Leaves the member at the last offset.
    fn evolve(
        &self,
        member: &mut Self::Member,
        times: &[f64],
        visit: &mut dyn FnMut(usize, &Self::Member),
    ) -> Result<()>;

    fn rotate(&self, member: &mut Self::Member, axis: Axis, angle: f64);

    fn observe(&self, member: &Self::Member) -> Observables;

    fn spin_x(&self, member: &Self::Member) -> Vec<f64>;

    /// Same propagator with the uniform transverse field set to `h S_x`.
    fn with_field(&self, h: f64) -> Result<Self>;
}

/// Runs `program` on every member and accumulates the observations it
/// reports into `slots` accumulators.
pub fn ensemble_average<M, F>(members: &[M], slots: usize, n_spins: usize, program: F) -> Result<Vec<Accumulator>>
where
    M: Sync,
    F: Fn(&M, &mut dyn FnMut(usize, Observables)) -> Result<()> + Sync,
{
    let parts: Result<Vec<Vec<Accumulator>>> = members
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![Accumulator::default(); slots];
            for m in chunk {
                program(m, &mut |slot, obs| acc[slot].push(&obs, n_spins))?;
            }
            Ok(acc)
        })
        .collect();
    let parts = parts?;
    if parts.is_empty() {
        return Ok(vec![Accumulator::default(); slots]);
    }
    Ok(tree_reduce(parts))
}

/// Evolves all members through `times` and returns per-time accumulators.
pub fn sample_series<P: Propagator>(p: &P, members: &[P::Member], times: &[f64]) -> Result<Vec<Accumulator>> {
    ensemble_average(members, times.len(), p.n_spins(), |m, push| {
        let mut m = m.clone();
        p.evolve(&mut m, times, &mut |k, s| push(k, p.observe(s)))
    })
}
