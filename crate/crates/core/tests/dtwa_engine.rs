mod common;

use std::sync::Arc;

use common::*;
use dipolar_squeeze::analytics::{dimer_readout, dimer_twisting};
use dipolar_squeeze::dtwa::{build_clusters, run_dtwa, DtwaParams, DtwaPropagator};
use dipolar_squeeze::model::{CouplingGraph, HamiltonianSpec};
use dipolar_squeeze::moments::SZ;
use dipolar_squeeze::sim::{sample_series, Initial, Propagator};
use dipolar_squeeze::units::J0;
use dipolar_squeeze::Axis;

fn pair_model(j: f64) -> dipolar_squeeze::model::SpinModel {
    HamiltonianSpec::dimer(j).lower().unwrap()
}

#[test]
fn isolated_pair_reproduces_dimer_twisting() {
    let j = 0.9;
    let phi = 0.35;
    let p = DtwaPropagator::new(&pair_model(j), &DtwaParams::default()).unwrap();
    let init = Initial { eta: 1.0, members: 20_000, tip: Some((Axis::Y, phi)) };
    let members = p.members(&init, 5).unwrap();
    let times: Vec<f64> = (0..8).map(|k| 0.4 * k as f64).collect();
    let acc = sample_series(&p, &members, &times).unwrap();
    for (t, a) in times.iter().zip(&acc) {
        let m = a.finish();
        let (sx, sy) = dimer_twisting(phi, j, *t);
        assert!((m.mean[0] - sx).abs() < 3.0 * m.stderr[0] + 1e-12, "t={t} sx {} vs {sx}", m.mean[0]);
        assert!((m.mean[1] - sy).abs() < 3.0 * m.stderr[1] + 1e-12, "t={t} sy {} vs {sy}", m.mean[1]);
    }
}

#[test]
fn isolated_pair_reproduces_dimer_readout() {
    let j = 1.3;
    let p = DtwaPropagator::new(&pair_model(j), &DtwaParams::default()).unwrap();
    let members = p.members(&Initial::polarized(1.0, 20_000), 9).unwrap();
    let t_g = 0.8;
    for &theta in &[0.0, 0.7, 1.6] {
        let times = [0.0, 0.3, 0.8, 1.5];
        let acc = dipolar_squeeze::sim::ensemble_average(&members, times.len(), 2, |m, push| {
            let mut m = m.clone();
            p.evolve(&mut m, &[t_g], &mut |_, _| {})?;
            p.rotate(&mut m, Axis::X, theta);
            p.evolve(&mut m, &times, &mut |k, s| push(k, p.observe(s)))
        })
        .unwrap();
        for (t, a) in times.iter().zip(&acc) {
            let m = a.finish();
            let want = dimer_readout(theta, j, t_g, *t);
            assert!((m.mean[0] - want).abs() < 3.0 * m.stderr[0] + 1e-12);
        }
    }
}

#[test]
fn total_sz_is_conserved_per_trajectory() {
    let (_, g) = random_graph(12, 1.41e-3, 4);
    let m = HamiltonianSpec::xxz(Arc::new(g)).lower().unwrap();
    let p = DtwaPropagator::new(&m, &DtwaParams::default()).unwrap();
    let members = p.members(&Initial::polarized(0.8, 4), 1).unwrap();
    for mut t in members {
        let sz0 = p.observe(&t)[SZ];
        p.evolve(&mut t, &[1.0, 2.0, 3.0], &mut |_, s| {
            assert!((p.observe(s)[SZ] - sz0).abs() < 1e-10);
        })
        .unwrap();
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (_, g) = random_graph(10, 1.41e-3, 6);
    let m = HamiltonianSpec::xxz(Arc::new(g)).lower().unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_dtwa(&m, &DtwaParams::default(), &Initial::polarized(0.8, 100), &[0.5, 1.0], 77).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn clusters_pair_the_strongest_bonds() {
    let e = dipolar_squeeze::ensemble::SpinEnsemble::from_positions(
        vec![[0.0, 0.0, 0.0], [5.0, 0.0, 0.0], [30.0, 0.0, 0.0], [33.0, 0.0, 0.0], [80.0, 0.0, 0.0]],
        dipolar_squeeze::ensemble::LayerBox { lx: 100.0, ly: 1.0, thickness: 0.0 },
        1e-3,
    );
    let g = CouplingGraph::build(&e, J0).unwrap();
    let c = build_clusters(&g, 2).unwrap();
    assert_eq!(c.pairs, vec![(2, 3), (0, 1)]);
    assert_eq!(c.singles, vec![4]);
}
