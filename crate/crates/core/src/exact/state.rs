use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::moments::Observables;
use crate::rng::{stream, tag};
use crate::Axis;

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n: usize,
    amps: Vec<C64>,
}

impl PureState {
    pub fn from_amplitudes(n: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 1usize << n {
            return invalid(format!("expected {} amplitudes for {n} spins, got {}", 1usize << n, amps.len()));
        }
        Ok(Self { n, amps })
    }

    /// Product state with spin `i` in the single-spin state `spins[i]`
    /// (amplitudes of up and down).
    pub fn product(spins: &[[C64; 2]]) -> Self {
        let n = spins.len();
        let mut amps = vec![C64::new(1.0, 0.0)];
        for (i, s) in spins.iter().enumerate() {
            let mut next = vec![C64::new(0.0, 0.0); amps.len() * 2];
            let bit = 1usize << i;
            for (b, a) in amps.iter().enumerate() {
                next[b] = a * s[0];
                next[b | bit] = a * s[1];
            }
            amps = next;
        }
        Self { n, amps }
    }

    pub fn n_spins(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut Vec<C64> {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let s = 1.0 / self.norm();
        self.amps.iter_mut().for_each(|a| *a *= s);
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Applies `exp(-i φ S_a)` with `S_a` the collective spin along `axis`.
    pub fn rotate_global(&mut self, axis: Axis, angle: f64) {
        let (s, c) = (0.5 * angle).sin_cos();
        let i = C64::new(0.0, 1.0);
        let u: [[C64; 2]; 2] = match axis {
            Axis::X => [[C64::new(c, 0.0), -i * s], [-i * s, C64::new(c, 0.0)]],
            Axis::Y => [[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]],
            Axis::Z => [[C64::new(c, -s), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(c, s)]],
        };
        for q in 0..self.n {
            let bit = 1usize << q;
            for b in 0..self.amps.len() {
                if b & bit == 0 {
                    let a0 = self.amps[b];
                    let a1 = self.amps[b | bit];
                    self.amps[b] = u[0][0] * a0 + u[0][1] * a1;
                    self.amps[b | bit] = u[1][0] * a0 + u[1][1] * a1;
                }
            }
        }
    }

    fn sz_value(&self, b: usize) -> f64 {
        0.5 * self.n as f64 - b.count_ones() as f64
    }

    /// Collective first and second moments.
    pub fn observables(&self) -> Observables {
        let dim = self.amps.len();
        let half = C64::new(0.5, 0.0);
        let ih = C64::new(0.0, 0.5);
        let mut xs = vec![C64::new(0.0, 0.0); dim];
        let mut ys = vec![C64::new(0.0, 0.0); dim];
        for q in 0..self.n {
            let bit = 1usize << q;
            for b in 0..dim {
                let a = self.amps[b ^ bit];
                xs[b] += half * a;
                if b & bit == 0 {
                    ys[b] -= ih * a;
                } else {
                    ys[b] += ih * a;
                }
            }
        }
        let mut o = [0.0; 9];
        for b in 0..dim {
            let p = self.amps[b];
            let z = self.sz_value(b);
            let zp = p * z;
            o[0] += (p.conj() * xs[b]).re;
            o[1] += (p.conj() * ys[b]).re;
            o[2] += p.norm_sqr() * z;
            o[3] += xs[b].norm_sqr();
            o[4] += ys[b].norm_sqr();
            o[5] += p.norm_sqr() * z * z;
            o[6] += (ys[b].conj() * zp).re;
            o[7] += (xs[b].conj() * ys[b]).re;
            o[8] += (xs[b].conj() * zp).re;
        }
        o
    }

    /// Single-spin expectations `⟨s_x^i⟩`.
    pub fn spin_x(&self) -> Vec<f64> {
        (0..self.n)
            .map(|q| {
                let bit = 1usize << q;
                self.amps
                    .iter()
                    .enumerate()
                    .map(|(b, a)| 0.5 * (a.conj() * self.amps[b ^ bit]).re)
                    .sum()
            })
            .collect()
    }
}

fn axis_state(axis: Axis, up: bool) -> [C64; 2] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let sign = if up { 1.0 } else { -1.0 };
    match axis {
        Axis::Z if up => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        Axis::Z => [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        Axis::X => [C64::new(r, 0.0), C64::new(sign * r, 0.0)],
        Axis::Y => [C64::new(r, 0.0), C64::new(0.0, sign * r)],
    }
}

/// Product state polarized along `+axis`, where each spin is independently
/// flipped with probability `(1 - η)/2`. With `η = 1` the result is the
/// coherent spin state and `seed` is unused.
pub fn prepare_polarized(n: usize, axis: Axis, eta: f64, seed: u64, max_spins: usize) -> Result<PureState> {
    if n == 0 {
        return invalid("state needs at least one spin");
    }
    if n > max_spins {
        return Err(Error::CapacityExceeded { n, max: max_spins });
    }
    if !(0.0..=1.0).contains(&eta) {
        return invalid(format!("polarization must lie in [0, 1], got {eta}"));
    }
    let mut rng = stream(seed, &[tag::MEMBERS]);
    let flip = 0.5 * (1.0 - eta);
    let spins: Vec<[C64; 2]> = (0..n)
        .map(|_| {
            let up = !(flip > 0.0 && rng.gen::<f64>() < flip);
            axis_state(axis, up)
        })
        .collect();
    Ok(PureState::product(&spins))
}
