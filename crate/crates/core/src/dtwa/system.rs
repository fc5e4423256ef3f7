//! Trajectory representation, equations of motion and integrator.
//!
//! State layout: `m_i` at `y[3i..3i+3]`, then for pair `p = (i, j)` the
//! correlators `T_ab = ⟨s_a^i s_b^j⟩` at `y[3N + 9p + 3a + b]`.
//!
//! Steps use a fourth-order integrating-factor Runge–Kutta scheme: the linear
//! intra-pair dynamics is exponentiated exactly and only the mean-field part
//! is sampled at the Runge–Kutta stages.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::{Arc, Mutex};

use crate::dtwa::{build_clusters_weighted, ClusterPartition};
use crate::error::{invalid, Error, Result};
use crate::model::SpinModel;
use crate::moments::Observables;
use crate::rng::stream;
use crate::sim::{Initial, Propagator};
use crate::Axis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtwaParams {
    /// Integration steps per inverse mean-field rate.
    pub steps_per_unit: f64,
    pub max_cluster_size: usize,
}

impl Default for DtwaParams {
    fn default() -> Self {
        Self { steps_per_unit: 50.0, max_cluster_size: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub y: Vec<f64>,
}

type Mat15 = [f64; 225];

pub struct DtwaPropagator {
    n: usize,
    model: SpinModel,
    part: ClusterPartition,
    gens: Vec<DMatrix<f64>>,
    steps_per_unit: f64,
    h_max: f64,
    cache: Mutex<Vec<(u64, Arc<Vec<Mat15>>)>>,
}

fn eps(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

fn pair_generator(g: [f64; 3]) -> DMatrix<f64> {
    let t = |a: usize, b: usize| 6 + 3 * a + b;
    let mut m = DMatrix::<f64>::zeros(15, 15);
    for a in 0..3 {
        for c in 0..3 {
            for e in 0..3 {
                let s = eps(c, a, e);
                if s != 0.0 {
                    m[(a, t(e, c))] -= g[c] * s;
                    m[(3 + a, t(c, e))] -= g[c] * s;
                }
            }
        }
    }
    for a in 0..3 {
        for b in 0..3 {
            for k in 0..3 {
                m[(t(a, b), k)] -= 0.25 * g[b] * eps(b, a, k);
                m[(t(a, b), 3 + k)] -= 0.25 * g[a] * eps(a, b, k);
            }
        }
    }
    m
}

#[inline]
fn cross(b: &[f64; 3], v: &[f64; 3]) -> [f64; 3] {
    [b[1] * v[2] - b[2] * v[1], b[2] * v[0] - b[0] * v[2], b[0] * v[1] - b[1] * v[0]]
}

impl DtwaPropagator {
    pub fn new(model: &SpinModel, params: &DtwaParams) -> Result<Self> {
        let n = model.n;
        if n == 0 {
            return invalid("DTWA needs at least one spin");
        }
        if !(params.steps_per_unit > 0.0) {
            return invalid("steps_per_unit must be positive");
        }
        let w: Vec<f64> = model.xy.iter().zip(&model.zz).map(|(a, b)| a.abs().max(b.abs())).collect();
        let part = build_clusters_weighted(n, &w, params.max_cluster_size)?;
        let gens = part
            .pairs
            .iter()
            .map(|&(i, j)| pair_generator([model.xy[i * n + j], model.xy[i * n + j], model.zz[i * n + j]]))
            .collect();
        let mut out = Self {
            n,
            model: model.clone(),
            part,
            gens,
            steps_per_unit: params.steps_per_unit,
            h_max: f64::INFINITY,
            cache: Mutex::new(Vec::new()),
        };
        out.h_max = out.compute_h_max();
        Ok(out)
    }

    /// Step bound from the largest inter-cluster coupling, the largest summed
    /// mean field a spin can feel, and the external field.
    fn compute_h_max(&self) -> f64 {
        let n = self.n;
        let field = self.model.field_x.abs();
        let mut rate = field;
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                if j != i && self.part.partner(i) != Some(j) {
                    let w = self.model.xy[i * n + j].abs().max(self.model.zz[i * n + j].abs());
                    rate = rate.max(w);
                    sum += w;
                }
            }
            rate = rate.max(0.5 * sum + field);
        }
        if rate > 0.0 { 1.0 / (self.steps_per_unit * rate) } else { f64::INFINITY }
    }

    pub fn partition(&self) -> &ClusterPartition {
        &self.part
    }

    /// Largest integration step.
    pub fn max_step(&self) -> f64 {
        self.h_max
    }

    fn len(&self) -> usize {
        3 * self.n + 9 * self.part.pairs.len()
    }

    fn propagators(&self, half: f64) -> Arc<Vec<Mat15>> {
        let key = half.to_bits();
        let mut cache = self.cache.lock().unwrap();
        if let Some((_, e)) = cache.iter().find(|(k, _)| *k == key) {
            return e.clone();
        }
        let mats: Vec<Mat15> = self
            .gens
            .iter()
            .map(|g| {
                let e = (g * half).exp();
                let mut out = [0.0; 225];
                for r in 0..15 {
                    for c in 0..15 {
                        out[15 * r + c] = e[(r, c)];
                    }
                }
                out
            })
            .collect();
        let e = Arc::new(mats);
        if cache.len() > 16 {
            cache.remove(0);
        }
        cache.push((key, e.clone()));
        e
    }

    fn apply_exp(&self, e: &[Mat15], y: &mut [f64]) {
        let n3 = 3 * self.n;
        for (p, &(i, j)) in self.part.pairs.iter().enumerate() {
            let mut v = [0.0; 15];
            v[..3].copy_from_slice(&y[3 * i..3 * i + 3]);
            v[3..6].copy_from_slice(&y[3 * j..3 * j + 3]);
            v[6..].copy_from_slice(&y[n3 + 9 * p..n3 + 9 * p + 9]);
            let m = &e[p];
            let mut w = [0.0; 15];
            for r in 0..15 {
                let row = &m[15 * r..15 * r + 15];
                w[r] = row.iter().zip(&v).map(|(a, b)| a * b).sum();
            }
            y[3 * i..3 * i + 3].copy_from_slice(&w[..3]);
            y[3 * j..3 * j + 3].copy_from_slice(&w[3..6]);
            y[n3 + 9 * p..n3 + 9 * p + 9].copy_from_slice(&w[6..]);
        }
    }

    /// Mean-field part of the equations of motion.
    fn rhs(&self, y: &[f64], dy: &mut [f64], fields: &mut [[f64; 3]]) {
        let n = self.n;
        let (xy, zz) = (&self.model.xy, &self.model.zz);
        for i in 0..n {
            let mut b = [self.model.field_x, 0.0, 0.0];
            let skip = self.part.partner(i);
            let (rx, rz) = (&xy[i * n..i * n + n], &zz[i * n..i * n + n]);
            for j in 0..n {
                if j == i || skip == Some(j) {
                    continue;
                }
                let m = &y[3 * j..3 * j + 3];
                b[0] += rx[j] * m[0];
                b[1] += rx[j] * m[1];
                b[2] += rz[j] * m[2];
            }
            fields[i] = b;
            let m = [y[3 * i], y[3 * i + 1], y[3 * i + 2]];
            dy[3 * i..3 * i + 3].copy_from_slice(&cross(&b, &m));
        }
        let n3 = 3 * n;
        for (p, &(i, j)) in self.part.pairs.iter().enumerate() {
            let t = &y[n3 + 9 * p..n3 + 9 * p + 9];
            let (bi, bj) = (fields[i], fields[j]);
            let mut d = [0.0; 9];
            for b in 0..3 {
                let col = [t[b], t[3 + b], t[6 + b]];
                let r = cross(&bi, &col);
                for a in 0..3 {
                    d[3 * a + b] += r[a];
                }
            }
            for a in 0..3 {
                let row = [t[3 * a], t[3 * a + 1], t[3 * a + 2]];
                let r = cross(&bj, &row);
                for b in 0..3 {
                    d[3 * a + b] += r[b];
                }
            }
            dy[n3 + 9 * p..n3 + 9 * p + 9].copy_from_slice(&d);
        }
    }

    fn step(&self, y: &mut [f64], h: f64, e: &[Mat15], w: &mut Work) {
        let Work { k1, k2, k3, k4, u, fields } = w;
        self.rhs(y, k1, fields);
        for ((u, y), k) in u.iter_mut().zip(y.iter()).zip(k1.iter()) {
            *u = y + 0.5 * h * k;
        }
        self.apply_exp(e, u);
        self.rhs(u, k2, fields);
        // y ← E_{h/2} y
        self.apply_exp(e, y);
        for ((u, y), k) in u.iter_mut().zip(y.iter()).zip(k2.iter()) {
            *u = y + 0.5 * h * k;
        }
        self.rhs(u, k3, fields);
        for ((u, y), k) in u.iter_mut().zip(y.iter()).zip(k3.iter()) {
            *u = y + h * k;
        }
        self.apply_exp(e, u);
        self.rhs(u, k4, fields);
        // y_{n+1} = E[E(y_n + h/6 k1) + h/3 (k2 + k3)] + h/6 k4, with E y_n already in y
        self.apply_exp(e, k1);
        for i in 0..y.len() {
            y[i] += h / 6.0 * k1[i] + h / 3.0 * (k2[i] + k3[i]);
        }
        self.apply_exp(e, y);
        for i in 0..y.len() {
            y[i] += h / 6.0 * k4[i];
        }
    }

    fn sample(&self, eta: f64, rng: &mut impl Rng) -> Vec<f64> {
        let mut y = vec![0.0; self.len()];
        let flip = 0.5 * (1.0 - eta);
        let pm = |rng: &mut dyn rand::RngCore| if rng.gen::<bool>() { 0.5 } else { -0.5 };
        for i in 0..self.n {
            let x = if flip > 0.0 && rng.gen::<f64>() < flip { -0.5 } else { 0.5 };
            y[3 * i] = x;
            y[3 * i + 1] = pm(rng);
            y[3 * i + 2] = pm(rng);
        }
        let n3 = 3 * self.n;
        for (p, &(i, j)) in self.part.pairs.iter().enumerate() {
            for a in 0..3 {
                for b in 0..3 {
                    y[n3 + 9 * p + 3 * a + b] = y[3 * i + a] * y[3 * j + b];
                }
            }
        }
        y
    }
}

struct Work {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    u: Vec<f64>,
    fields: Vec<[f64; 3]>,
}

impl Work {
    fn new(len: usize, n: usize) -> Self {
        Self {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            u: vec![0.0; len],
            fields: vec![[0.0; 3]; n],
        }
    }
}

impl Propagator for DtwaPropagator {
    type Member = Trajectory;

    fn n_spins(&self) -> usize {
        self.n
    }

    fn members(&self, init: &Initial, seed: u64) -> Result<Vec<Trajectory>> {
        if !(0.0..=1.0).contains(&init.eta) {
            return invalid(format!("polarization must lie in [0, 1], got {}", init.eta));
        }
        if init.members == 0 {
            return invalid("DTWA needs at least one trajectory");
        }
        Ok((0..init.members)
            .map(|k| {
                let mut rng = stream(seed, &[k as u64]);
                let mut t = Trajectory { y: self.sample(init.eta, &mut rng) };
                if let Some((axis, angle)) = init.tip {
                    self.rotate(&mut t, axis, angle);
                }
                t
            })
            .collect())
    }

    fn evolve(&self, m: &mut Trajectory, times: &[f64], visit: &mut dyn FnMut(usize, &Trajectory)) -> Result<()> {
        let mut work = Work::new(self.len(), self.n);
        let mut now = 0.0;
        for (k, &t) in times.iter().enumerate() {
            let dt = t - now;
            if dt != 0.0 {
                let steps = if self.h_max.is_finite() { (dt.abs() / self.h_max).ceil().max(1.0) } else { 1.0 };
                let h = dt / steps;
                let e = self.propagators(0.5 * h);
                for _ in 0..steps as usize {
                    self.step(&mut m.y, h, &e, &mut work);
                }
                if m.y.iter().any(|v| !v.is_finite() || v.abs() > 1e6) {
                    return Err(Error::Integration(format!("trajectory diverged before t = {t}")));
                }
                now = t;
            }
            visit(k, m);
        }
        Ok(())
    }

    fn rotate(&self, m: &mut Trajectory, axis: Axis, angle: f64) {
        let r = axis.rotation(angle);
        let rot = |v: [f64; 3]| -> [f64; 3] {
            [
                r[0][0] * v[0] + r[0][1] * v[1] + r[0][2] * v[2],
                r[1][0] * v[0] + r[1][1] * v[1] + r[1][2] * v[2],
                r[2][0] * v[0] + r[2][1] * v[1] + r[2][2] * v[2],
            ]
        };
        for i in 0..self.n {
            let v = rot([m.y[3 * i], m.y[3 * i + 1], m.y[3 * i + 2]]);
            m.y[3 * i..3 * i + 3].copy_from_slice(&v);
        }
        let n3 = 3 * self.n;
        for p in 0..self.part.pairs.len() {
            let t = &mut m.y[n3 + 9 * p..n3 + 9 * p + 9];
            let mut rt = [0.0; 9];
            for a in 0..3 {
                for b in 0..3 {
                    rt[3 * a + b] = (0..3).map(|c| r[a][c] * t[3 * c + b]).sum();
                }
            }
            for a in 0..3 {
                for b in 0..3 {
                    t[3 * a + b] = (0..3).map(|c| rt[3 * a + c] * r[b][c]).sum();
                }
            }
        }
    }

    fn observe(&self, m: &Trajectory) -> Observables {
        let y = &m.y;
        let n = self.n;
        let mut s = [0.0; 3];
        let mut self_prod = [[0.0; 3]; 3];
        for i in 0..n {
            let v = &y[3 * i..3 * i + 3];
            for a in 0..3 {
                s[a] += v[a];
                for b in 0..3 {
                    self_prod[a][b] += v[a] * v[b];
                }
            }
        }
        let mut pair_corr = [[0.0; 3]; 3];
        let n3 = 3 * n;
        for (p, &(i, j)) in self.part.pairs.iter().enumerate() {
            let t = &y[n3 + 9 * p..n3 + 9 * p + 9];
            for a in 0..3 {
                for b in 0..3 {
                    pair_corr[a][b] += t[3 * a + b] + t[3 * b + a] - y[3 * i + a] * y[3 * j + b] - y[3 * j + a] * y[3 * i + b];
                }
            }
        }
        let q = |a: usize, b: usize| {
            let diag = if a == b { 0.25 * n as f64 } else { 0.0 };
            s[a] * s[b] - self_prod[a][b] + pair_corr[a][b] + diag
        };
        [s[0], s[1], s[2], q(0, 0), q(1, 1), q(2, 2), q(1, 2), q(0, 1), q(0, 2)]
    }

    fn spin_x(&self, m: &Trajectory) -> Vec<f64> {
        (0..self.n).map(|i| m.y[3 * i]).collect()
    }

    fn with_field(&self, h: f64) -> Result<Self> {
        let mut out = Self {
            n: self.n,
            model: self.model.with_field(h),
            part: self.part.clone(),
            gens: self.gens.clone(),
            steps_per_unit: self.steps_per_unit,
            h_max: f64::INFINITY,
            cache: Mutex::new(Vec::new()),
        };
        out.h_max = out.compute_h_max();
        Ok(out)
    }
}
