//! Adaptive Lanczos propagation of `exp(-iHt)`.
//!
//! A Krylov basis is built once per substep; the substep length is the
//! largest for which the residual estimate `β_m |e_mᵀ exp(-iTτ) e_1|` stays
//! under the tolerance share of that substep. All requested output times
//! inside an accepted substep are served from the same basis.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::exact::{ExactHamiltonian, PureState};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KrylovParams {
    pub max_dim: usize,
    pub tol: f64,
    pub max_substeps: usize,
}

impl Default for KrylovParams {
    fn default() -> Self {
        Self { max_dim: 30, tol: 1e-10, max_substeps: 100_000 }
    }
}

struct Basis {
    v: Vec<Vec<C64>>,
    evals: Vec<f64>,
    evecs: DMatrix<f64>,
    beta_last: f64,
    exact: bool,
}

impl Basis {
    fn coeffs(&self, tau: f64) -> Vec<C64> {
        let m = self.evals.len();
        let w: Vec<C64> = (0..m)
            .map(|l| C64::from_polar(self.evecs[(0, l)], -self.evals[l] * tau))
            .collect();
        (0..m).map(|k| (0..m).map(|l| w[l] * self.evecs[(k, l)]).sum()).collect()
    }

    fn error(&self, tau: f64) -> f64 {
        if self.exact {
            return 0.0;
        }
        self.beta_last * self.coeffs(tau).last().unwrap().norm()
    }

    fn assemble(&self, y: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = C64::new(0.0, 0.0));
        for (vk, &c) in self.v.iter().zip(y) {
            for (o, a) in out.iter_mut().zip(vk) {
                *o += a * c;
            }
        }
        let nrm = out.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        out.iter_mut().for_each(|a| *a /= nrm);
    }
}

fn lanczos(h: &ExactHamiltonian, start: &[C64], m: usize) -> Basis {
    let dim = start.len();
    let m = m.min(dim).max(1);
    let mut v: Vec<Vec<C64>> = vec![start.to_vec()];
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut w = vec![C64::new(0.0, 0.0); dim];
    let mut beta_last = 0.0;
    let mut exact = false;
    let breakdown = 1e-13 * h.scale().max(1e-300);
    for k in 0..m {
        h.apply(&v[k], &mut w);
        let a: f64 = v[k].iter().zip(&w).map(|(x, y)| (x.conj() * y).re).sum();
        for _ in 0..2 {
            for vj in &v {
                let c: C64 = vj.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                for (x, a) in w.iter_mut().zip(vj) {
                    *x -= a * c;
                }
            }
        }
        alpha.push(a);
        let b = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if b < breakdown || k + 1 == dim {
            exact = true;
            break;
        }
        if k + 1 == m {
            beta_last = b;
            break;
        }
        beta.push(b);
        v.push(w.iter().map(|x| x / b).collect());
    }
    let n = alpha.len();
    let mut t = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        t[(k, k)] = alpha[k];
        if k + 1 < n {
            t[(k, k + 1)] = beta[k];
            t[(k + 1, k)] = beta[k];
        }
    }
    let eig = SymmetricEigen::new(t);
    v.truncate(n);
    Basis { v, evals: eig.eigenvalues.iter().cloned().collect(), evecs: eig.eigenvectors, beta_last, exact }
}

/// Evolves `state` through the offsets `times` (monotone, all of one sign,
/// measured from the current time), calling `visit(k, state)` as each is
/// reached. On return `state` sits at the last offset.
pub fn propagate_sampled<F: FnMut(usize, &PureState)>(
    state: &mut PureState,
    h: &ExactHamiltonian,
    times: &[f64],
    params: &KrylovParams,
    mut visit: F,
) -> Result<()> {
    if h.n_spins() != state.n_spins() {
        return invalid("state and Hamiltonian act on different spin counts");
    }
    if times.is_empty() {
        return Ok(());
    }
    let total = times.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    let dir = if times.iter().any(|&t| t < 0.0) { -1.0 } else { 1.0 };
    if times.iter().any(|&t| t * dir < 0.0) || times.windows(2).any(|w| (w[1] - w[0]) * dir < 0.0) {
        return invalid("output times must be monotone and of one sign");
    }
    let mut now = 0.0f64;
    let mut next = 0usize;
    let mut tau_guess = total;
    let mut buf = vec![C64::new(0.0, 0.0); state.amplitudes().len()];
    let mut steps = 0usize;
    while next < times.len() {
        while next < times.len() && (times[next] * dir - now) <= 1e-15 * total.max(1.0) {
            visit(next, state);
            next += 1;
        }
        if next == times.len() {
            break;
        }
        steps += 1;
        if steps > params.max_substeps {
            return Err(Error::Convergence(format!("more than {} Krylov substeps", params.max_substeps)));
        }
        let remaining = times[times.len() - 1] * dir - now;
        let basis = lanczos(h, state.amplitudes(), params.max_dim);
        let mut tau = tau_guess.min(remaining);
        let allowed = |t: f64| params.tol * (t / total).max(1e-3);
        let mut shrinks = 0;
        while basis.error(dir * tau) > allowed(tau) {
            tau *= 0.5;
            shrinks += 1;
            if tau < 1e-13 * total || shrinks > 200 {
                return Err(Error::Convergence(format!("Krylov step collapsed at t = {}", dir * now)));
            }
        }
        if shrinks == 0 {
            tau_guess = (2.0 * tau).max(tau_guess);
        } else {
            tau_guess = tau;
        }
        let end = now + tau;
        while next < times.len() && times[next] * dir <= end + 1e-15 * total.max(1.0) {
            let y = basis.coeffs(dir * (times[next] * dir - now));
            basis.assemble(&y, &mut buf);
            std::mem::swap(state.amplitudes_mut(), &mut buf);
            visit(next, state);
            std::mem::swap(state.amplitudes_mut(), &mut buf);
            next += 1;
        }
        let y = basis.coeffs(dir * tau);
        basis.assemble(&y, &mut buf);
        std::mem::swap(state.amplitudes_mut(), &mut buf);
        now = end;
    }
    Ok(())
}

/// `exp(-iHt) |state⟩`.
pub fn krylov_propagate(state: &PureState, h: &ExactHamiltonian, t: f64, params: &KrylovParams) -> Result<PureState> {
    let mut s = state.clone();
    propagate_sampled(&mut s, h, &[t], params, |_, _| {})?;
    Ok(s)
}
