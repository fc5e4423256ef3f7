//! The full squeezing experiment: twisting calibration, generation, readout
//! over a θ grid, offset shifting, fitting, variance mapping and extraction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::offset_time;
use crate::error::{invalid, Result};
use crate::fit::{
    build_variance_map, extract_xi2, fit_stretched, shift_curve, slice_overlap_error, DecayCurve, FitResult, FitWindow, MapPoint,
    MeasuredT2, PMode, VarianceMap, WindowStart, XiInput, XiPoint,
};
use crate::moments::CollectiveMoments;
use crate::protocol::{run_generation, run_readout, run_twisting, QuenchPlan, TwistResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezePlan {
    pub quench: QuenchPlan,
    /// Generation times; `t_g = 0` is always added.
    pub t_g: Vec<f64>,
    pub theta: Vec<f64>,
    pub t_r: Vec<f64>,
    /// Tip angle and sample times of the twisting calibration.
    pub twist_phi: f64,
    pub twist_times: Vec<f64>,
    /// Upper ends of the fitting window; the first is the reported fit.
    pub t_max: Vec<f64>,
    #[serde(default)]
    pub p_mode: PMode,
    /// Common start of the fitting window; each slice starts at its own `t_g` when absent.
    #[serde(default)]
    pub window_start: Option<f64>,
    /// Fit `p` once over every slice and hold it fixed in the per-slice fits.
    #[serde(default = "yes")]
    pub shared_p: bool,
    pub map_tolerance: f64,
    #[serde(default)]
    pub map_mode: MapMode,
}

/// Which support points feed the map used for extraction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapMode {
    /// One map from every generation time.
    #[default]
    Global,
    /// A separate map for each generation time.
    PerSlice,
}

fn yes() -> bool {
    true
}

impl SqueezePlan {
    fn check(&self) -> Result<()> {
        for (name, g) in [("generation", &self.t_g), ("θ", &self.theta), ("readout", &self.t_r)] {
            if g.is_empty() {
                return invalid(format!("{name} grid is empty"));
            }
            if g.windows(2).any(|w| !(w[1] > w[0])) {
                return invalid(format!("{name} grid must be strictly increasing"));
            }
        }
        if self.t_r[0] != 0.0 {
            return invalid("readout grid must start at 0");
        }
        if self.t_max.is_empty() {
            return invalid("fitting window sweep is empty");
        }
        Ok(())
    }
}

/// Fits and support points for one generation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub t_g: f64,
    pub moments: CollectiveMoments,
    /// Readout curves on effective time `t_r - t_o`, one per θ.
    pub curves: Vec<DecayCurve>,
    /// True `Var(S_θ)/Var(S_z)` per θ.
    pub var_ratio: Vec<f64>,
    /// One fit per window in the sweep.
    pub fits: Vec<FitResult>,
}

/// ξ² computed directly from the simulated moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectXi {
    pub t_g: f64,
    /// `min Var(S_θ)/Var(S_z) · (S_x(0)/S_x(t_g))²`.
    pub relative: f64,
    /// `N min Var(S_θ) / ⟨S_x⟩²`.
    pub wineland: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SqueezeReport {
    pub chi: f64,
    pub twist: TwistResult,
    pub slices: Vec<Slice>,
    /// One map per fitting window, built from every slice.
    pub maps: Vec<VarianceMap>,
    /// Maps built from each positive generation time alone, per fitting window.
    pub slice_maps: Vec<Vec<VarianceMap>>,
    /// Largest disagreement between per-slice maps, per fitting window.
    pub slice_overlap: Vec<f64>,
    pub xi2: Vec<XiPoint>,
    pub direct: Vec<DirectXi>,
}

/// Support points of the map built from the `w`-th window of every slice.
pub fn map_points(slices: &[Slice], w: usize) -> Vec<MapPoint> {
    slices
        .iter()
        .flat_map(|s| {
            s.fits[w].curves.iter().zip(&s.var_ratio).map(move |(c, &v)| MapPoint {
                t2: c.t2,
                var: v,
                t_g: s.t_g,
                theta: c.theta,
            })
        })
        .collect()
}

pub fn run_squeeze(plan: &SqueezePlan) -> Result<SqueezeReport> {
    plan.check()?;
    let twist = run_twisting(&plan.quench, plan.twist_phi, &plan.twist_times)?;
    let chi = twist.chi()?;

    let mut t_g = plan.t_g.clone();
    if t_g[0] != 0.0 {
        t_g.insert(0, 0.0);
    }
    if t_g.len() < 2 {
        return invalid("at least one positive generation time is required");
    }
    let gen = run_generation(&plan.quench, &t_g)?;
    let initial = gen.moments[0];

    let start = match plan.window_start {
        Some(t) => WindowStart::Fixed { t },
        None => WindowStart::GenerationTime,
    };
    let mut all_curves = Vec::with_capacity(t_g.len());
    for (k, &tg) in t_g.iter().enumerate() {
        let m = gen.moments[k];
        let var0 = m.var_theta(0.0);
        let mut curves = Vec::with_capacity(plan.theta.len());
        let mut var_ratio = Vec::with_capacity(plan.theta.len());
        for &theta in &plan.theta {
            let r = run_readout(&gen.snapshots[k], theta, &plan.t_r)?;
            curves.push(shift_curve(&r.curve(tg), offset_time(theta, chi, tg)));
            var_ratio.push(m.var_theta(theta) / var0);
        }
        all_curves.push((tg, m, curves, var_ratio));
    }

    let p_modes: Vec<PMode> = if plan.shared_p {
        let joint: Vec<DecayCurve> = all_curves.iter().flat_map(|c| c.2.iter().cloned()).collect();
        plan.t_max
            .par_iter()
            .map(|&t_max| Ok(PMode::Fixed { p: fit_stretched(&joint, &FitWindow { start, t_max }, plan.p_mode)?.p }))
            .collect::<Result<_>>()?
    } else {
        vec![plan.p_mode; plan.t_max.len()]
    };
    let mut slices = Vec::with_capacity(t_g.len());
    for (tg, m, curves, var_ratio) in all_curves {
        let fits = plan
            .t_max
            .par_iter()
            .zip(&p_modes)
            .map(|(&t_max, &mode)| fit_stretched(&curves, &FitWindow { start, t_max }, mode))
            .collect::<Result<Vec<_>>>()?;
        slices.push(Slice { t_g: tg, moments: m, curves, var_ratio, fits });
    }

    let windows = 0..plan.t_max.len();
    // the t_g = 0 slice carries no spread in T2 and gets no map of its own
    let per_slice: Vec<Vec<VarianceMap>> = windows
        .clone()
        .map(|w| {
            slices[1..]
                .iter()
                .map(|s| build_variance_map(&map_points(std::slice::from_ref(s), w), plan.map_tolerance))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let slice_overlap = per_slice.iter().map(|m| slice_overlap_error(m)).collect();
    let maps = match plan.map_mode {
        MapMode::Global => windows
            .map(|w| build_variance_map(&map_points(&slices, w), plan.map_tolerance))
            .collect::<Result<Vec<_>>>()?,
        MapMode::PerSlice => Vec::new(),
    };

    let inputs: Vec<XiInput> = slices
        .iter()
        .map(|s| XiInput {
            t_g: s.t_g,
            sx0: initial.sx(),
            sx_tg: s.moments.sx(),
            sweep: s
                .fits
                .iter()
                .map(|f| {
                    f.curves
                        .iter()
                        .map(|c| MeasuredT2 { theta: c.theta, t2: c.t2, t2_stderr: c.t2_stderr })
                        .collect()
                })
                .collect(),
        })
        .collect();
    let xi2 = match plan.map_mode {
        MapMode::Global => extract_xi2(&maps, &inputs)?,
        MapMode::PerSlice => {
            let mut out = vec![XiPoint {
                t_g: 0.0,
                xi2: 1.0,
                stderr: 0.0,
                sweep_spread: 0.0,
                error: 0.0,
                theta_min: 0.0,
                sweep_values: vec![1.0; plan.t_max.len()],
                r2: 1.0,
            }];
            for (k, inp) in inputs[1..].iter().enumerate() {
                let m: Vec<VarianceMap> = per_slice.iter().map(|w| w[k].clone()).collect();
                out.extend(extract_xi2(&m, std::slice::from_ref(inp))?);
            }
            out
        }
    };

    let direct = slices
        .iter()
        .map(|s| {
            Ok(DirectXi {
                t_g: s.t_g,
                relative: s.moments.relative_squeezing(&initial)?,
                wineland: s.moments.squeezing_parameter()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(SqueezeReport { chi, twist, slices, maps, slice_maps: per_slice, slice_overlap, xi2, direct })
}
