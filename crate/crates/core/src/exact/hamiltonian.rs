use num_complex::Complex64 as C64;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exact::PureState;
use crate::model::SpinModel;

#[derive(Debug, Clone, Copy)]
struct Flip {
    i: usize,
    j: usize,
    amp: f64,
}

/// Matrix-free Hamiltonian in the `s_z` product basis.
#[derive(Debug, Clone)]
pub struct ExactHamiltonian {
    n: usize,
    diag: Arc<Vec<f64>>,
    flips: Arc<Vec<Flip>>,
    field: f64,
    scale: f64,
}

impl ExactHamiltonian {
    pub fn new(model: &SpinModel, max_spins: usize) -> Result<Self> {
        let n = model.n;
        if n > max_spins {
            return Err(Error::CapacityExceeded { n, max: max_spins });
        }
        let dim = 1usize << n;
        let mut diag = vec![0.0; dim];
        let mut flips = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let z = model.zz[i * n + j];
                if z != 0.0 {
                    let q = 0.25 * z;
                    for (b, d) in diag.iter_mut().enumerate() {
                        let same = ((b >> i) ^ (b >> j)) & 1 == 0;
                        *d += if same { q } else { -q };
                    }
                }
                let xy = model.xy[i * n + j];
                if xy != 0.0 {
                    flips.push(Flip { i, j, amp: 0.5 * xy });
                }
            }
        }
        let row: f64 = (0..n)
            .map(|i| (0..n).map(|j| model.xy[i * n + j].abs() + model.zz[i * n + j].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let scale = row + model.field_x.abs() * n as f64;
        Ok(Self { n, diag: Arc::new(diag), flips: Arc::new(flips), field: model.field_x, scale })
    }

    /// Same interactions with the transverse field replaced by `h S_x`.
    pub fn with_field(&self, h: f64) -> Self {
        let mut out = self.clone();
        out.scale += (h.abs() - self.field.abs()) * self.n as f64;
        out.field = h;
        out
    }

    pub fn n_spins(&self) -> usize {
        self.n
    }

    /// Rough bound on the spectral radius.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        for ((yb, xb), d) in y.iter_mut().zip(x).zip(self.diag.iter()) {
            *yb = xb * d;
        }
        for f in self.flips.iter() {
            let (bi, bj) = (1usize << f.i, 1usize << f.j);
            let mask = bi | bj;
            for b in 0..x.len() {
                if b & bi == 0 && b & bj != 0 {
                    let c = b ^ mask;
                    y[c] += x[b] * f.amp;
                    y[b] += x[c] * f.amp;
                }
            }
        }
        if self.field != 0.0 {
            let h = 0.5 * self.field;
            for q in 0..self.n {
                let bit = 1usize << q;
                for b in 0..x.len() {
                    if b & bit == 0 {
                        let c = b | bit;
                        y[c] += x[b] * h;
                        y[b] += x[c] * h;
                    }
                }
            }
        }
    }

    pub fn energy(&self, state: &PureState) -> f64 {
        let x = state.amplitudes();
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        self.apply(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Dense matrix (row-major), for small systems only.
    pub fn to_dense(&self) -> Result<Vec<C64>> {
        if self.n > 12 {
            return Err(Error::CapacityExceeded { n: self.n, max: 12 });
        }
        let dim = 1usize << self.n;
        let mut m = vec![C64::new(0.0, 0.0); dim * dim];
        let mut e = vec![C64::new(0.0, 0.0); dim];
        let mut col = vec![C64::new(0.0, 0.0); dim];
        for c in 0..dim {
            e.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            e[c] = C64::new(1.0, 0.0);
            self.apply(&e, &mut col);
            for r in 0..dim {
                m[r * dim + c] = col[r];
            }
        }
        Ok(m)
    }
}
