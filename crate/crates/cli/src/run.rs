//! Execution of resolved experiments and persistence of their results.

use rayon::prelude::*;
use serde::Serialize;

use dipolar_squeeze::analytics::Crossover;
use dipolar_squeeze::ensemble::SpinStatus;
use dipolar_squeeze::moments::{CollectiveMoments, SX, SY, SZ};
use dipolar_squeeze::pipeline::{map_points, run_squeeze, SqueezePlan, SqueezeReport};
use dipolar_squeeze::protocol::{realize, run_generation, run_readout, run_twisting, EngineSpec, GeometrySpec, QuenchPlan};
use dipolar_squeeze::rng::{derive_seed, tag};

use crate::config::Resolved;
use crate::error::CliError;
use crate::output::{Cell, Sink, Table};

use Cell::{F, U};

pub fn realization_seeds(master: u64, realizations: usize) -> Vec<u64> {
    (0..realizations as u64).map(|r| derive_seed(master, &[tag::REALIZATION, r])).collect()
}

fn members(q: &QuenchPlan) -> usize {
    match q.engine {
        EngineSpec::Exact { samples, .. } => {
            if q.eta == 1.0 {
                1
            } else {
                samples
            }
        }
        EngineSpec::Dtwa { trajectories, .. } => trajectories,
    }
}

/// Provenance metadata and the trailing provenance columns of averaged rows.
fn provenance(t: Table, q: &QuenchPlan) -> Table {
    let engine = match q.engine {
        EngineSpec::Exact { .. } => "exact",
        EngineSpec::Dtwa { .. } => "dtwa",
    };
    t.meta("engine", engine).meta("eta", q.eta).meta("seed", q.seed).meta("realizations", q.realizations).meta("members", members(q))
}

fn prov_cells(q: &QuenchPlan) -> [Cell; 3] {
    [U(q.seed), U(q.realizations as u64), U(members(q) as u64)]
}

const PROV: [&str; 3] = ["seed", "realizations", "members"];

fn columns<'a>(head: &[&'a str]) -> Vec<&'a str> {
    head.iter().copied().chain(PROV).collect()
}

fn row(t: &mut Table, head: &[Cell], q: &QuenchPlan) {
    let cells: Vec<Cell> = head.iter().copied().chain(prov_cells(q)).collect();
    t.row(&cells);
}

pub fn execute(resolved: &Resolved, sink: &mut Sink) -> Result<(), CliError> {
    match resolved {
        Resolved::Ensemble { geometry, realizations, seed } => ensemble(geometry, *realizations, *seed, sink),
        Resolved::Twist { quench, phi, times } => twist(quench, *phi, times, sink),
        Resolved::Generation { quench, t_g } => generation(quench, t_g, sink),
        Resolved::Readout { quench, t_g, theta, t_r } => readout(quench, t_g, theta, t_r, sink),
        Resolved::Map { plan } => {
            let report = run_squeeze(plan)?;
            write_maps(plan, &report, sink)
        }
        Resolved::Squeeze { plan } => {
            let report = run_squeeze(plan)?;
            write_maps(plan, &report, sink)?;
            write_squeeze(plan, &report, sink)
        }
        Resolved::Crossover { density, j0, r_min, times } => crossover(*density, *j0, r_min, times, sink),
    }
}

fn ensemble(geometry: &GeometrySpec, realizations: usize, seed: u64, sink: &mut Sink) -> Result<(), CliError> {
    let seeds = realization_seeds(seed, realizations);
    let reals = seeds.par_iter().map(|&s| realize(geometry, s)).collect::<dipolar_squeeze::Result<Vec<_>>>()?;
    let mut summary = Table::new(&[
        "realization",
        "seed",
        "sampled",
        "active",
        "shelved",
        "depolarized",
        "mean_nn_distance",
        "mean_local_coupling",
    ])
    .meta("density", geometry.density)
    .meta("thickness", geometry.thickness)
    .meta("j0", geometry.j0);
    let mut spins = Table::new(&["realization", "seed", "spin", "x", "y", "z", "status", "nn_distance"]);
    for (r, (real, &s)) in reals.iter().zip(&seeds).enumerate() {
        let e = &real.ensemble;
        let count = |st: SpinStatus| e.status.iter().filter(|&&x| x == st).count() as u64;
        let nn = e.nn_distances();
        let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
        summary.row(&[
            U(r as u64),
            U(s),
            U(e.len() as u64),
            U(count(SpinStatus::Active)),
            U(count(SpinStatus::Shelved)),
            U(count(SpinStatus::Depolarized)),
            F(mean(&nn)),
            F(mean(real.graph.local_couplings())),
        ]);
        let mut k_active = 0;
        for (i, p) in e.positions.iter().enumerate() {
            let (code, d) = match e.status[i] {
                SpinStatus::Active => {
                    k_active += 1;
                    (0, nn[k_active - 1])
                }
                SpinStatus::Shelved => (1, f64::NAN),
                SpinStatus::Depolarized => (2, f64::NAN),
            };
            spins.row(&[U(r as u64), U(s), U(i as u64), F(p[0]), F(p[1]), F(p[2]), U(code), F(d)]);
        }
    }
    sink.csv("ensemble.csv", &summary)?;
    sink.csv("spins.csv", &spins.meta("status", "0 active, 1 shelved, 2 depolarized"))
}

fn moment_row(m: &CollectiveMoments) -> [Cell; 6] {
    [F(m.sx()), F(m.stderr[SX]), F(m.sy()), F(m.stderr[SY]), F(m.sz()), F(m.stderr[SZ])]
}

const MOMENT_COLS: [&str; 6] = ["sx", "sx_stderr", "sy", "sy_stderr", "sz", "sz_stderr"];

fn twist(q: &QuenchPlan, phi: f64, times: &[f64], sink: &mut Sink) -> Result<(), CliError> {
    let res = run_twisting(q, phi, times)?;
    let mut head = vec!["t"];
    head.extend(MOMENT_COLS);
    head.extend(["ratio", "phase"]);
    let mut t = provenance(Table::new(&columns(&head)), q).meta("phi", phi);
    for ((&time, m), (r, ph)) in times.iter().zip(&res.moments).zip(res.ratios().into_iter().zip(res.phases())) {
        let mut cells = vec![F(time)];
        cells.extend(moment_row(m));
        cells.extend([F(r), F(ph)]);
        row(&mut t, &cells, q);
    }
    sink.csv("twist.csv", &t)?;
    #[derive(Serialize)]
    struct Out {
        phi: f64,
        chi: f64,
    }
    sink.json("twist.json", &Out { phi, chi: res.chi()? })
}

fn generation(q: &QuenchPlan, t_g: &[f64], sink: &mut Sink) -> Result<(), CliError> {
    let gen = run_generation(q, t_g)?;
    let initial = gen.moments[0];
    let mut head = vec!["t_g"];
    head.extend(MOMENT_COLS);
    head.extend(["var_min", "theta_min", "xi2", "xi2_relative"]);
    let mut t = provenance(Table::new(&columns(&head)), q);
    for (&tg, m) in t_g.iter().zip(&gen.moments) {
        let mut cells = vec![F(tg)];
        cells.extend(moment_row(m));
        cells.extend([
            F(m.min_variance()),
            F(m.min_angle()),
            F(m.squeezing_parameter().unwrap_or(f64::NAN)),
            F(m.relative_squeezing(&initial).unwrap_or(f64::NAN)),
        ]);
        row(&mut t, &cells, q);
    }
    sink.csv("generation.csv", &t)
}

fn readout(q: &QuenchPlan, t_g: &[f64], theta: &[f64], t_r: &[f64], sink: &mut Sink) -> Result<(), CliError> {
    let gen = run_generation(q, t_g)?;
    let mut t = provenance(Table::new(&columns(&["t_g", "theta", "t", "mean", "stderr"])), q)
        .meta("mean", "<S_x> / (N/2)");
    for (k, &tg) in t_g.iter().enumerate() {
        let curves = theta
            .par_iter()
            .map(|&th| run_readout(&gen.snapshots[k], th, t_r).map(|r| r.curve(tg)))
            .collect::<dipolar_squeeze::Result<Vec<_>>>()?;
        for c in curves {
            for i in 0..c.t.len() {
                row(&mut t, &[F(tg), F(c.theta), F(c.t[i]), F(c.y[i]), F(c.stderr[i])], q);
            }
        }
    }
    sink.csv("readout.csv", &t)
}

fn write_maps(plan: &SqueezePlan, report: &SqueezeReport, sink: &mut Sink) -> Result<(), CliError> {
    let q = &plan.quench;
    let mut fits = provenance(
        Table::new(&columns(&["t_max", "t_g", "theta", "amplitude", "amplitude_stderr", "t2", "t2_stderr", "p", "var_ratio"])),
        q,
    )
    .meta("chi", report.chi);
    let mut curves = provenance(Table::new(&columns(&["t_g", "theta", "t", "mean", "stderr"])), q)
        .meta("t", "readout time minus offset time");
    for s in &report.slices {
        for (w, f) in s.fits.iter().enumerate() {
            for (c, v) in f.curves.iter().zip(&s.var_ratio) {
                row(
                    &mut fits,
                    &[F(plan.t_max[w]), F(s.t_g), F(c.theta), F(c.amplitude), F(c.amplitude_stderr), F(c.t2), F(c.t2_stderr), F(f.p), F(*v)],
                    q,
                );
            }
        }
        for c in &s.curves {
            for i in 0..c.t.len() {
                row(&mut curves, &[F(s.t_g), F(c.theta), F(c.t[i]), F(c.y[i]), F(c.stderr[i])], q);
            }
        }
    }
    sink.csv("fits.csv", &fits)?;
    sink.csv("curves.csv", &curves)?;
    for (w, m) in report.maps.iter().enumerate() {
        sink.write(&format!("map_{w}.csv"), m.to_csv().as_bytes())?;
    }
    #[derive(Serialize)]
    struct Maps<'a> {
        t_max: &'a [f64],
        chi: f64,
        maps: &'a [dipolar_squeeze::fit::VarianceMap],
        slice_maps: &'a [Vec<dipolar_squeeze::fit::VarianceMap>],
        slice_overlap: &'a [f64],
        points: Vec<Vec<dipolar_squeeze::fit::MapPoint>>,
    }
    let points = (0..plan.t_max.len()).map(|w| map_points(&report.slices, w)).collect();
    sink.json(
        "maps.json",
        &Maps {
            t_max: &plan.t_max,
            chi: report.chi,
            maps: &report.maps,
            slice_maps: &report.slice_maps,
            slice_overlap: &report.slice_overlap,
            points,
        },
    )
}

fn write_squeeze(plan: &SqueezePlan, report: &SqueezeReport, sink: &mut Sink) -> Result<(), CliError> {
    let q = &plan.quench;
    let mut t = provenance(
        Table::new(&columns(&["t_g", "xi2", "error", "stderr", "sweep_spread", "theta_min", "direct_relative", "direct_wineland"])),
        q,
    )
    .meta("chi", report.chi);
    for (x, d) in report.xi2.iter().zip(&report.direct) {
        row(
            &mut t,
            &[F(x.t_g), F(x.xi2), F(x.error), F(x.stderr), F(x.sweep_spread), F(x.theta_min), F(d.relative), F(d.wineland)],
            q,
        );
    }
    sink.csv("xi2.csv", &t)?;
    sink.json("report.json", report)
}

fn crossover(density: f64, j0: f64, r_min: &[f64], times: &[f64], sink: &mut Sink) -> Result<(), CliError> {
    let mut t = Table::new(&["r_min", "t", "sx", "local_exponent"]).meta("density", density).meta("j0", j0);
    #[derive(Serialize)]
    struct Point {
        r_min: f64,
        crossover_time: f64,
    }
    let mut points = Vec::new();
    for &r in r_min {
        let c = Crossover { density, r_min: r, j0 };
        for &time in times {
            let lx = if time > 0.0 { c.local_exponent(time)? } else { f64::NAN };
            t.row(&[F(r), F(time), F(c.sx(time)?), F(lx)]);
        }
        points.push(Point { r_min: r, crossover_time: c.crossover_time()? });
    }
    sink.csv("crossover.csv", &t)?;
    sink.json("crossover.json", &points)
}
