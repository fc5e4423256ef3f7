#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use dipolar_squeeze::ensemble::{sample_fixed_count, LayerBox, SpinEnsemble};
use dipolar_squeeze::model::{CouplingGraph, SpinModel};
use dipolar_squeeze::units::J0;

pub fn spin_ops() -> [DMatrix<C64>; 3] {
    let z = C64::new(0.0, 0.0);
    let h = C64::new(0.5, 0.0);
    let ih = C64::new(0.0, 0.5);
    [
        DMatrix::from_row_slice(2, 2, &[z, h, h, z]),
        DMatrix::from_row_slice(2, 2, &[z, -ih, ih, z]),
        DMatrix::from_row_slice(2, 2, &[h, z, z, -h]),
    ]
}

/// Operator `op` on spin `site` of `n`, with spin 0 as the least significant bit.
pub fn site_op(op: &DMatrix<C64>, site: usize, n: usize) -> DMatrix<C64> {
    let id = DMatrix::<C64>::identity(2, 2);
    let mut m = DMatrix::<C64>::identity(1, 1);
    for q in (0..n).rev() {
        let f = if q == site { op } else { &id };
        m = m.kronecker(f);
    }
    m
}

pub fn collective(axis: usize, n: usize) -> DMatrix<C64> {
    let ops = spin_ops();
    let dim = 1 << n;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for q in 0..n {
        m += site_op(&ops[axis], q, n);
    }
    m
}

/// Dense Hamiltonian built from Kronecker products.
pub fn dense_hamiltonian(model: &SpinModel) -> DMatrix<C64> {
    let n = model.n;
    let ops = spin_ops();
    let s: Vec<Vec<DMatrix<C64>>> = (0..n).map(|q| (0..3).map(|a| site_op(&ops[a], q, n)).collect()).collect();
    let dim = 1 << n;
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..n {
        for j in i + 1..n {
            let xy = C64::new(model.xy[i * n + j], 0.0);
            let zz = C64::new(model.zz[i * n + j], 0.0);
            h += (&s[i][0] * &s[j][0] + &s[i][1] * &s[j][1]) * xy + &s[i][2] * &s[j][2] * zz;
        }
        h += &s[i][0] * C64::new(model.field_x, 0.0);
    }
    h
}

/// `exp(-iHt) ψ` through a real symmetric eigendecomposition.
pub fn dense_evolve(h: &DMatrix<C64>, psi: &[C64], t: f64) -> Vec<C64> {
    let re = h.map(|c| {
        assert!(c.im.abs() < 1e-14);
        c.re
    });
    let eig = SymmetricEigen::new(re);
    let v = eig.eigenvectors.map(|x| C64::new(x, 0.0));
    let p = DVector::from_column_slice(psi);
    let mut c = v.adjoint() * p;
    for (k, e) in eig.eigenvalues.iter().enumerate() {
        c[k] *= C64::from_polar(1.0, -e * t);
    }
    (v * c).iter().cloned().collect()
}

pub fn expect(op: &DMatrix<C64>, psi: &[C64]) -> C64 {
    let p = DVector::from_column_slice(psi);
    (p.adjoint() * op * &p)[(0, 0)]
}

pub fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm_sqr()
}

/// A random 2D-ish ensemble of exactly `n` spins with couplings scaled by J0.
pub fn random_graph(n: usize, density: f64, seed: u64) -> (SpinEnsemble, CouplingGraph) {
    let e = sample_fixed_count(n, density, 7.0, seed).unwrap();
    let g = CouplingGraph::build(&e, J0).unwrap();
    (e, g)
}

pub fn pair_ensemble(r: f64) -> SpinEnsemble {
    SpinEnsemble::from_positions(
        vec![[0.0, 0.0, 0.0], [r, 0.0, 0.0]],
        LayerBox { lx: r.max(1.0), ly: 1.0, thickness: 0.0 },
        1e-3,
    )
}
