//! Experiment protocols: geometry realization, generation and readout
//! quenches, twisting, and the adiabatic transverse-field ramp.

use serde::{Deserialize, Serialize};

use std::sync::Arc;

use crate::analytics::{chi_from_twisting, ramp_field};
use crate::dtwa::{DtwaParams, DtwaPropagator};
use crate::ensemble::{apply_removal, sample_positions, LayerBox, RemovalModel, SpinEnsemble};
use crate::error::{invalid, Error, Result};
use crate::exact::{ExactPropagator, KrylovParams, DEFAULT_MAX_SPINS};
use crate::fit::DecayCurve;
use crate::model::{CouplingGraph, HamiltonianSpec};
use crate::moments::{tree_reduce, Accumulator, CollectiveMoments, SX};
use crate::rng::{derive_seed, tag};
use crate::sim::{ensemble_average, sample_series, Initial, Propagator, CHUNK};
use rayon::prelude::*;
use crate::Axis;

/// How many spins a realization contains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SizeSpec {
    /// Poisson-distributed count in a fixed box.
    Box { lx: f64, ly: f64 },
    /// Exactly `n` active spins: an oversized Poisson sample is drawn, the
    /// removal model applied, and the `n` active spins nearest the center kept.
    Active { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    /// Areal density in nm⁻².
    pub density: f64,
    pub thickness: f64,
    pub size: SizeSpec,
    pub removal: Option<RemovalModel>,
    pub j0: f64,
}

/// One disorder realization: the full sampled ensemble (with statuses) and the
/// coupling graph over its active spins.
#[derive(Debug, Clone)]
pub struct Realization {
    pub ensemble: SpinEnsemble,
    pub graph: CouplingGraph,
}

pub fn realize(spec: &GeometrySpec, seed: u64) -> Result<Realization> {
    match spec.size {
        SizeSpec::Box { lx, ly } => {
            let layer = LayerBox { lx, ly, thickness: spec.thickness };
            let e = sample_positions(spec.density, layer, seed)?;
            let e = remove(spec, e, seed)?;
            let graph = CouplingGraph::build(&e, spec.j0)?;
            Ok(Realization { ensemble: e, graph })
        }
        SizeSpec::Active { n } => {
            if n == 0 {
                return invalid("active count must be positive");
            }
            let mut area = 2.5 * n as f64 / spec.density;
            for attempt in 0..12u64 {
                let layer = LayerBox::square(area, spec.thickness);
                let s = derive_seed(seed, &[tag::REALIZATION, attempt]);
                let e = sample_positions(spec.density, layer, s)?;
                if e.len() >= n {
                    let mut e = remove(spec, e, s)?;
                    if e.n_active() >= 2 * n || (e.n_active() >= n && attempt >= 6) {
                        e.keep_central(n)?;
                        let graph = CouplingGraph::build(&e, spec.j0)?;
                        return Ok(Realization { ensemble: e, graph });
                    }
                }
                area *= 2.0;
            }
            Err(Error::InvalidGeometry(format!("could not obtain {n} active spins")))
        }
    }
}

fn remove(spec: &GeometrySpec, e: SpinEnsemble, seed: u64) -> Result<SpinEnsemble> {
    match spec.removal {
        None => Ok(e),
        Some(model) => {
            if e.n_active() == 0 {
                return Ok(e);
            }
            let g = CouplingGraph::build(&e, spec.j0)?;
            apply_removal(&e, model, &g, seed)
        }
    }
}

/// Engine selection and its sampling budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EngineSpec {
    Exact {
        #[serde(default)]
        krylov: KrylovParams,
        #[serde(default = "default_max_spins")]
        max_spins: usize,
        /// Sampled product states per realization when η < 1.
        samples: usize,
    },
    Dtwa {
        #[serde(default)]
        params: DtwaParams,
        trajectories: usize,
    },
}

fn default_max_spins() -> usize {
    DEFAULT_MAX_SPINS
}

/// Everything that defines a population of realizations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchPlan {
    pub geometry: GeometrySpec,
    pub engine: EngineSpec,
    /// Initial polarization along `+x`.
    pub eta: f64,
    pub realizations: usize,
    pub seed: u64,
}

impl QuenchPlan {
    fn check(&self) -> Result<()> {
        if self.realizations == 0 {
            return invalid("at least one realization is required");
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return invalid(format!("polarization must lie in [0, 1], got {}", self.eta));
        }
        Ok(())
    }
}

/// A propagator together with its members.
pub struct Population<P: Propagator> {
    pub prop: Arc<P>,
    pub members: Vec<P::Member>,
}

impl<P: Propagator> Clone for Population<P>
where
    P::Member: Clone,
{
    fn clone(&self) -> Self {
        Self { prop: Arc::clone(&self.prop), members: self.members.clone() }
    }
}

#[derive(Clone)]
pub enum AnyPopulation {
    Exact(Population<ExactPropagator>),
    Dtwa(Population<DtwaPropagator>),
}

macro_rules! with_pop {
    ($any:expr, $pop:ident => $body:expr) => {
        match $any {
            AnyPopulation::Exact($pop) => $body,
            AnyPopulation::Dtwa($pop) => $body,
        }
    };
}

impl AnyPopulation {
    pub fn n_spins(&self) -> usize {
        with_pop!(self, p => p.prop.n_spins())
    }

    pub fn len(&self) -> usize {
        with_pop!(self, p => p.members.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Builds the population of realization `r` with initial condition `init`.
pub fn population(plan: &QuenchPlan, r: usize, tip: Option<(Axis, f64)>, stream_tag: u64) -> Result<(Realization, AnyPopulation)> {
    plan.check()?;
    let geo_seed = derive_seed(plan.seed, &[tag::REALIZATION, r as u64]);
    let real = realize(&plan.geometry, geo_seed)?;
    let model = HamiltonianSpec::xxz(Arc::new(real.graph.clone())).lower()?;
    let member_seed = derive_seed(plan.seed, &[stream_tag, r as u64]);
    let pop = match plan.engine {
        EngineSpec::Exact { krylov, max_spins, samples } => {
            let prop = ExactPropagator::new(&model, krylov, max_spins)?;
            let members = prop.members(&Initial { eta: plan.eta, members: samples, tip }, member_seed)?;
            AnyPopulation::Exact(Population { prop: Arc::new(prop), members })
        }
        EngineSpec::Dtwa { params, trajectories } => {
            let prop = DtwaPropagator::new(&model, &params)?;
            let members = prop.members(&Initial { eta: plan.eta, members: trajectories, tip }, member_seed)?;
            AnyPopulation::Dtwa(Population { prop: Arc::new(prop), members })
        }
    };
    Ok((real, pop))
}

fn finish_all(acc: &[Accumulator]) -> Vec<CollectiveMoments> {
    acc.iter().map(|a| a.finish()).collect()
}

fn merge_into(total: &mut Vec<Accumulator>, part: Vec<Accumulator>) {
    if total.is_empty() {
        *total = part;
    } else {
        for (a, b) in total.iter_mut().zip(&part) {
            a.merge(b);
        }
    }
}

/// Result of the generation quench: moments at each `t_g` and the member
/// snapshots (one population per realization) for later readout.
#[derive(Clone)]
pub struct GenerationResult {
    pub t_g: Vec<f64>,
    pub moments: Vec<CollectiveMoments>,
    pub snapshots: Vec<Vec<AnyPopulation>>,
}

fn check_grid(times: &[f64], what: &str) -> Result<()> {
    if times.is_empty() {
        return invalid(format!("{what} grid is empty"));
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return invalid(format!("{what} grid must be non-negative and non-decreasing"));
    }
    Ok(())
}

/// Evolves the polarized state under the XXZ Hamiltonian and snapshots it at
/// each generation time.
pub fn run_generation(plan: &QuenchPlan, t_g: &[f64]) -> Result<GenerationResult> {
    plan.check()?;
    check_grid(t_g, "generation time")?;
    let parts = (0..plan.realizations)
        .into_par_iter()
        .map(|r| {
            let (_, pop) = population(plan, r, None, tag::MEMBERS)?;
            Ok(with_pop!(&pop, p => {
                let (acc, snaps) = generation_snapshots(p, t_g)?;
                (acc, snaps.into_iter().map(|members| wrap(p, members)).collect::<Vec<_>>())
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Vec::new();
    let mut snapshots: Vec<Vec<AnyPopulation>> = vec![Vec::new(); t_g.len()];
    for (acc, snaps) in parts {
        merge_into(&mut total, acc);
        for (k, s) in snaps.into_iter().enumerate() {
            snapshots[k].push(s);
        }
    }
    Ok(GenerationResult { t_g: t_g.to_vec(), moments: finish_all(&total), snapshots })
}

trait Wrap: Propagator {
    fn wrap(pop: Population<Self>) -> AnyPopulation;
}

impl Wrap for ExactPropagator {
    fn wrap(pop: Population<Self>) -> AnyPopulation {
        AnyPopulation::Exact(pop)
    }
}

impl Wrap for DtwaPropagator {
    fn wrap(pop: Population<Self>) -> AnyPopulation {
        AnyPopulation::Dtwa(pop)
    }
}

fn wrap<P: Wrap>(p: &Population<P>, members: Vec<P::Member>) -> AnyPopulation {
    P::wrap(Population { prop: p.prop.clone(), members })
}

/// Per-time accumulators and member snapshots.
type Snapshots<M> = (Vec<Accumulator>, Vec<Vec<M>>);

fn generation_snapshots<P: Propagator>(p: &Population<P>, t_g: &[f64]) -> Result<Snapshots<P::Member>> {
    let prop = &*p.prop;
    let n = prop.n_spins();
    let parts: Result<Vec<Snapshots<P::Member>>> = p
        .members
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![Accumulator::default(); t_g.len()];
            let mut snaps: Vec<Vec<P::Member>> = vec![Vec::with_capacity(chunk.len()); t_g.len()];
            for m in chunk {
                let mut m = m.clone();
                prop.evolve(&mut m, t_g, &mut |k, s| {
                    acc[k].push(&prop.observe(s), n);
                    snaps[k].push(s.clone());
                })?;
            }
            Ok((acc, snaps))
        })
        .collect();
    let mut accs = Vec::new();
    let mut snaps: Vec<Vec<P::Member>> = vec![Vec::with_capacity(p.members.len()); t_g.len()];
    for (a, s) in parts? {
        accs.push(a);
        for (k, v) in s.into_iter().enumerate() {
            snaps[k].extend(v);
        }
    }
    Ok((tree_reduce(accs), snaps))
}

/// Readout of one snapshot: rotation by θ about x, then evolution over `t_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutResult {
    pub theta: f64,
    pub t_r: Vec<f64>,
    pub moments: Vec<CollectiveMoments>,
}

impl ReadoutResult {
    /// Polarization curve normalized by the fully polarized value `N/2`.
    pub fn curve(&self, t_g: f64) -> DecayCurve {
        let half = 0.5 * self.moments.first().map(|m| m.n_spins).unwrap_or(1.0);
        DecayCurve {
            t: self.t_r.clone(),
            y: self.moments.iter().map(|m| m.sx() / half).collect(),
            stderr: self.moments.iter().map(|m| m.stderr[SX] / half).collect(),
            t_g,
            theta: self.theta,
            shift: 0.0,
        }
    }
}

pub fn run_readout(snapshot: &[AnyPopulation], theta: f64, t_r: &[f64]) -> Result<ReadoutResult> {
    check_grid(t_r, "readout time")?;
    let parts = snapshot
        .par_iter()
        .map(|pop| with_pop!(pop, p => readout_acc(p, theta, t_r)))
        .collect::<Result<Vec<_>>>()?;
    let mut total = Vec::new();
    for acc in parts {
        merge_into(&mut total, acc);
    }
    Ok(ReadoutResult { theta, t_r: t_r.to_vec(), moments: finish_all(&total) })
}

fn readout_acc<P: Propagator>(p: &Population<P>, theta: f64, t_r: &[f64]) -> Result<Vec<Accumulator>> {
    let prop = &*p.prop;
    ensemble_average(&p.members, t_r.len(), prop.n_spins(), |m, push| {
        let mut m = m.clone();
        prop.rotate(&mut m, Axis::X, theta);
        prop.evolve(&mut m, t_r, &mut |k, s| push(k, prop.observe(s)))
    })
}

/// Collective precession of a state tipped out of the equator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwistResult {
    /// Tip angle above the equator (toward `+z`).
    pub phi: f64,
    pub times: Vec<f64>,
    pub moments: Vec<CollectiveMoments>,
}

impl TwistResult {
    pub fn ratios(&self) -> Vec<f64> {
        self.moments.iter().map(|m| m.sy() / m.sx()).collect()
    }

    /// Precession phase `atan2(S_y, S_x)`.
    pub fn phases(&self) -> Vec<f64> {
        self.moments.iter().map(|m| m.sy().atan2(m.sx())).collect()
    }

    pub fn chi(&self) -> Result<f64> {
        chi_from_twisting(&self.times, &self.ratios(), self.phi)
    }
}

/// Tips the polarized state by `phi` toward `+z` and records the precession.
pub fn run_twisting(plan: &QuenchPlan, phi: f64, times: &[f64]) -> Result<TwistResult> {
    plan.check()?;
    check_grid(times, "twisting time")?;
    let parts = (0..plan.realizations)
        .into_par_iter()
        .map(|r| {
            let (_, pop) = population(plan, r, Some((Axis::Y, -phi)), tag::TWIST)?;
            with_pop!(&pop, p => sample_series(&*p.prop, &p.members, times))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = Vec::new();
    for acc in parts {
        merge_into(&mut total, acc);
    }
    Ok(TwistResult { phi, times: times.to_vec(), moments: finish_all(&total) })
}

/// Spin-locking ramp `h(t) = h0 / sqrt(1 + h0² k t)` applied as a staircase,
/// with Hamiltonian `H_XXZ - h(t) S_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    pub h0: f64,
    pub k: f64,
    pub duration: f64,
    pub steps: usize,
}

/// Runs the ramp on a population and returns per-spin `⟨s_x⟩` averaged over
/// members.
pub fn run_adiabatic_ramp<P: Propagator>(prop: &P, members: &[P::Member], ramp: &RampSpec) -> Result<Vec<f64>> {
    if ramp.steps < 10 {
        return invalid(format!("ramp needs at least 10 staircase steps, got {}", ramp.steps));
    }
    if !(ramp.duration > 0.0) || !(ramp.k > 0.0) || !(ramp.h0 > 0.0) {
        return invalid(format!("invalid ramp {ramp:?}"));
    }
    let dt = ramp.duration / ramp.steps as f64;
    let props: Result<Vec<P>> = (0..ramp.steps)
        .map(|s| prop.with_field(-ramp_field(ramp.h0, ramp.k, (s as f64 + 0.5) * dt)))
        .collect();
    let props = props?;
    let n = prop.n_spins();
    let mut sum = vec![0.0; n];
    for m in members {
        let mut m = m.clone();
        for p in &props {
            p.evolve(&mut m, &[dt], &mut |_, _| {})?;
        }
        for (a, b) in sum.iter_mut().zip(prop.spin_x(&m)) {
            *a += b;
        }
    }
    let c = members.len().max(1) as f64;
    Ok(sum.into_iter().map(|v| v / c).collect())
}
