use crate::error::Result;
use crate::exact::{prepare_polarized, propagate_sampled, ExactHamiltonian, KrylovParams, PureState};
use crate::model::SpinModel;
use crate::moments::Observables;
use crate::rng::derive_seed;
use crate::sim::{Initial, Propagator};
use crate::Axis;

/// Exact engine for one realization. A partially polarized initial state is
/// represented by independently sampled product states; a fully polarized one
/// by a single member.
#[derive(Debug, Clone)]
pub struct ExactPropagator {
    h: ExactHamiltonian,
    params: KrylovParams,
    max_spins: usize,
}

impl ExactPropagator {
    pub fn new(model: &SpinModel, params: KrylovParams, max_spins: usize) -> Result<Self> {
        Ok(Self { h: ExactHamiltonian::new(model, max_spins)?, params, max_spins })
    }

    pub fn hamiltonian(&self) -> &ExactHamiltonian {
        &self.h
    }
}

impl Propagator for ExactPropagator {
    type Member = PureState;

    fn n_spins(&self) -> usize {
        self.h.n_spins()
    }

    fn members(&self, init: &Initial, seed: u64) -> Result<Vec<PureState>> {
        let count = if init.eta >= 1.0 { 1 } else { init.members.max(1) };
        (0..count)
            .map(|k| {
                let mut s =
                    prepare_polarized(self.n_spins(), Axis::X, init.eta, derive_seed(seed, &[k as u64]), self.max_spins)?;
                if let Some((axis, angle)) = init.tip {
                    s.rotate_global(axis, angle);
                }
                Ok(s)
            })
            .collect()
    }

    fn evolve(&self, m: &mut PureState, times: &[f64], visit: &mut dyn FnMut(usize, &PureState)) -> Result<()> {
        propagate_sampled(m, &self.h, times, &self.params, visit)
    }

    fn rotate(&self, m: &mut PureState, axis: Axis, angle: f64) {
        m.rotate_global(axis, angle);
    }

    fn observe(&self, m: &PureState) -> Observables {
        m.observables()
    }

    fn spin_x(&self, m: &PureState) -> Vec<f64> {
        m.spin_x()
    }

    fn with_field(&self, h: f64) -> Result<Self> {
        Ok(Self { h: self.h.with_field(h), params: self.params, max_spins: self.max_spins })
    }
}
