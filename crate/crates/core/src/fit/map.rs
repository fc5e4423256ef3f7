//! Monotone dictionary between readout decay time and collective variance.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::interp::{isotonic_decreasing, Pchip};

/// One simulated support point: fitted `T2` against the true variance ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapPoint {
    pub t2: f64,
    /// `Var(S_θ) / Var(S_{θ=0})` at the generation time.
    pub var: f64,
    pub t_g: f64,
    pub theta: f64,
}

/// Shape-preserving interpolant of `ln Var` against `ln T2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceMap {
    interp: Pchip,
    t2_range: (f64, f64),
    /// Largest relative departure of the scatter from the monotone fit.
    pub max_deviation: f64,
    pub support: Vec<MapPoint>,
}

impl VarianceMap {
    /// Range of `T2` over which the map may be evaluated.
    pub fn range(&self) -> (f64, f64) {
        self.t2_range
    }

    /// Interpolated variance ratio at `t2`.
    pub fn var_at(&self, t2: f64) -> Result<f64> {
        let (lo, hi) = self.t2_range;
        let slack = 1e-9 * hi;
        if !(t2 >= lo - slack && t2 <= hi + slack) {
            return Err(Error::Extrapolation { t2, lo, hi });
        }
        let (a, b) = self.interp.domain();
        let x = t2.ln().clamp(a, b);
        Ok(self.interp.eval(x).exp())
    }

    /// Monotone knots `(T2, Var)` actually interpolated.
    pub fn knots(&self) -> Vec<(f64, f64)> {
        let (x, y) = self.interp.knots();
        x.iter().zip(y).map(|(a, b)| (a.exp(), b.exp())).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t2,var_ratio,t_g,theta\n");
        for p in &self.support {
            s.push_str(&format!("{:.10e},{:.10e},{:.10e},{:.10e}\n", p.t2, p.var, p.t_g, p.theta));
        }
        s
    }
}

/// Builds the map from scattered points, failing when the scatter departs from
/// a non-increasing relation by more than `tolerance` (relative).
pub fn build_variance_map(points: &[MapPoint], tolerance: f64) -> Result<VarianceMap> {
    if points.iter().any(|p| !(p.t2 > 0.0 && p.var > 0.0 && p.t2.is_finite() && p.var.is_finite())) {
        return invalid("map points need finite positive T2 and variance");
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.t2.total_cmp(&b.t2).then(b.var.total_cmp(&a.var)));

    // merge coincident abscissae
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut ws: Vec<f64> = Vec::new();
    for p in &pts {
        let (x, y) = (p.t2.ln(), p.var.ln());
        match xs.last() {
            Some(&last) if (x - last).abs() < 1e-12 => {
                let k = xs.len() - 1;
                ys[k] = (ys[k] * ws[k] + y) / (ws[k] + 1.0);
                ws[k] += 1.0;
            }
            _ => {
                xs.push(x);
                ys.push(y);
                ws.push(1.0);
            }
        }
    }
    let iso = isotonic_decreasing(&ys, &ws);

    let mut worst = 0.0f64;
    let mut worst_at = None;
    for p in &pts {
        let k = xs.partition_point(|&x| x < p.t2.ln() - 1e-12);
        let dev = (p.var.ln() - iso[k]).exp() - 1.0;
        if dev.abs() > worst {
            worst = dev.abs();
            worst_at = Some(*p);
        }
    }
    if worst > tolerance {
        let p = worst_at.unwrap();
        return Err(Error::MapConstruction(format!(
            "scatter departs from a monotone relation by {:.1}% at T2 = {:.4}, Var = {:.4} (t_g = {}, θ = {:.4}); tolerance {:.1}%",
            100.0 * worst,
            p.t2,
            p.var,
            p.t_g,
            p.theta,
            100.0 * tolerance
        )));
    }

    // collapse pooled blocks to one knot so the interpolant is strictly monotone
    let mut kx: Vec<f64> = Vec::new();
    let mut ky: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        let (mut sx, mut sw) = (0.0, 0.0);
        while j < xs.len() && iso[j] == iso[i] {
            sx += xs[j] * ws[j];
            sw += ws[j];
            j += 1;
        }
        kx.push(sx / sw);
        ky.push(iso[i]);
        i = j;
    }
    if xs.len() < 2 {
        return Err(Error::MapConstruction("all support points share one T2".into()));
    }
    if kx.len() == 1 {
        // fully pooled scatter: a flat map over the support
        kx = vec![xs[0], xs[xs.len() - 1]];
        ky = vec![ky[0]; 2];
    }
    let interp = Pchip::new(kx, ky)?;
    Ok(VarianceMap {
        interp,
        t2_range: (pts[0].t2, pts[pts.len() - 1].t2),
        max_deviation: worst,
        support: pts,
    })
}

/// Separate maps for each generation time present in `points`.
pub fn slice_maps(points: &[MapPoint], tolerance: f64) -> Result<Vec<(f64, VarianceMap)>> {
    let mut tgs: Vec<f64> = points.iter().map(|p| p.t_g).collect();
    tgs.sort_by(f64::total_cmp);
    tgs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    tgs.into_iter()
        .map(|tg| {
            let slice: Vec<MapPoint> = points.iter().filter(|p| (p.t_g - tg).abs() < 1e-12).copied().collect();
            build_variance_map(&slice, tolerance).map(|m| (tg, m))
        })
        .collect()
}

/// Largest pairwise relative disagreement between maps on their common range.
pub fn slice_overlap_error(maps: &[VarianceMap]) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..maps.len() {
        for b in a + 1..maps.len() {
            let (la, ha) = maps[a].range();
            let (lb, hb) = maps[b].range();
            let (lo, hi) = (la.max(lb), ha.min(hb));
            if !(hi > lo) {
                continue;
            }
            for k in 0..=64 {
                let t = lo * (hi / lo).powf(k as f64 / 64.0);
                if let (Ok(va), Ok(vb)) = (maps[a].var_at(t), maps[b].var_at(t)) {
                    worst = worst.max((va / vb - 1.0).abs().max((vb / va - 1.0).abs()));
                }
            }
        }
    }
    worst
}
