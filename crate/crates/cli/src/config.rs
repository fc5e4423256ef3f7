//! Run configuration: TOML schema, validation and resolution into core plans.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use dipolar_squeeze::dtwa::DtwaParams;
use dipolar_squeeze::ensemble::RemovalModel;
use dipolar_squeeze::exact::{KrylovParams, DEFAULT_MAX_SPINS};
use dipolar_squeeze::fit::PMode;
use dipolar_squeeze::pipeline::{MapMode, SqueezePlan};
use dipolar_squeeze::protocol::{EngineSpec, GeometrySpec, QuenchPlan, SizeSpec};
use dipolar_squeeze::units::{areal_density_from_ppm_nm, DIAMOND_NUMBER_DENSITY, J0};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Ensemble,
    Twist,
    Generation,
    Readout,
    Map,
    Squeeze,
    Crossover,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub geometry: Geometry,
    pub engine: Option<Engine>,
    #[serde(default = "one")]
    pub eta: f64,
    #[serde(default = "one_usize")]
    pub realizations: usize,
    #[serde(default)]
    pub grids: Grids,
    pub twist: Option<Twist>,
    pub fit: Option<Fit>,
    pub crossover: Option<CrossoverCfg>,
    #[serde(default)]
    pub output: Output,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    /// Areal density in nm⁻².
    pub density: Option<f64>,
    /// Areal density in ppm·nm.
    pub density_ppm_nm: Option<f64>,
    #[serde(default = "carbon")]
    pub carbon_density: f64,
    pub thickness: f64,
    #[serde(default = "j0")]
    pub j0: f64,
    /// Fixed number of active spins.
    pub spins: Option<usize>,
    /// Box side lengths `[lx, ly]` in nm.
    #[serde(rename = "box")]
    pub layer: Option<[f64; 2]>,
    pub removal: Option<RemovalModel>,
}

fn carbon() -> f64 {
    DIAMOND_NUMBER_DENSITY
}

fn j0() -> f64 {
    J0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Engine {
    Exact {
        #[serde(default = "one_usize")]
        samples: usize,
        #[serde(default = "max_spins")]
        max_spins: usize,
        krylov_tol: Option<f64>,
        krylov_dim: Option<usize>,
    },
    Dtwa {
        trajectories: usize,
        steps_per_unit: Option<f64>,
        max_cluster_size: Option<usize>,
    },
}

fn max_spins() -> usize {
    DEFAULT_MAX_SPINS
}

/// Either an explicit list or `{ from, to, points }`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Linspace { from: f64, to: f64, points: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Grid::List(ref v) => v.clone(),
            Grid::Linspace { from, to, points } => match points {
                0 => Vec::new(),
                1 => vec![from],
                n => (0..n).map(|k| from + (to - from) * k as f64 / (n - 1) as f64).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub t_g: Option<Grid>,
    /// Readout rotation angles in units of π.
    pub theta: Option<Grid>,
    pub t_r: Option<Grid>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Twist {
    pub phi: f64,
    pub times: Grid,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fit {
    pub t_max: Vec<f64>,
    /// Fixed stretch power; fitted when absent.
    pub p: Option<f64>,
    #[serde(default = "p_bounds")]
    pub p_bounds: [f64; 2],
    pub window_start: Option<f64>,
    #[serde(default = "yes")]
    pub shared_p: bool,
    pub map_tolerance: f64,
    #[serde(default)]
    pub map_mode: MapMode,
}

fn p_bounds() -> [f64; 2] {
    [0.3, 3.0]
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossoverCfg {
    pub r_min: Vec<f64>,
    pub times: Grid,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub dir: Option<PathBuf>,
}

/// Parses TOML text, reporting the path of the offending key on failure.
pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.message().trim().to_string();
        CliError::Config { path: if path == "." { String::new() } else { path }, msg }
    })
}

fn cfg_err<T>(path: &str, msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config { path: path.to_string(), msg: msg.into() })
}

/// Validated, fully resolved experiment. Serializing it gives the canonical
/// form hashed into the manifest.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Resolved {
    Ensemble { geometry: GeometrySpec, realizations: usize, seed: u64 },
    Twist { quench: QuenchPlan, phi: f64, times: Vec<f64> },
    Generation { quench: QuenchPlan, t_g: Vec<f64> },
    Readout { quench: QuenchPlan, t_g: Vec<f64>, theta: Vec<f64>, t_r: Vec<f64> },
    Map { plan: SqueezePlan },
    Squeeze { plan: SqueezePlan },
    Crossover { density: f64, j0: f64, r_min: Vec<f64>, times: Vec<f64> },
}

fn grid(g: &Option<Grid>, path: &str, kind: Kind) -> Result<Vec<f64>, CliError> {
    let Some(g) = g else {
        return cfg_err(path, format!("required for {kind:?} runs").to_lowercase());
    };
    checked(g.values(), path)
}

fn checked(v: Vec<f64>, path: &str) -> Result<Vec<f64>, CliError> {
    if v.is_empty() {
        return cfg_err(path, "grid is empty");
    }
    if v.iter().any(|x| !x.is_finite()) {
        return cfg_err(path, "grid values must be finite");
    }
    if v.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
        return cfg_err(path, "grid must be strictly increasing");
    }
    Ok(v)
}

fn positive(x: f64, path: &str) -> Result<(), CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        cfg_err(path, format!("must be positive and finite, got {x}"))
    }
}

impl RunConfig {
    fn geometry(&self) -> Result<GeometrySpec, CliError> {
        let g = &self.geometry;
        positive(g.carbon_density, "geometry.carbon_density")?;
        let density = match (g.density, g.density_ppm_nm) {
            (Some(d), None) => d,
            (None, Some(ppm)) => {
                positive(ppm, "geometry.density_ppm_nm")?;
                areal_density_from_ppm_nm(ppm, g.carbon_density)
            }
            _ => return cfg_err("geometry", "exactly one of `density` and `density_ppm_nm` is required"),
        };
        positive(density, "geometry.density")?;
        positive(g.thickness, "geometry.thickness")?;
        positive(g.j0, "geometry.j0")?;
        let size = match (g.spins, g.layer) {
            (Some(0), None) => return cfg_err("geometry.spins", "must be at least 1"),
            (Some(n), None) => SizeSpec::Active { n },
            (None, Some([lx, ly])) => {
                positive(lx, "geometry.box[0]")?;
                positive(ly, "geometry.box[1]")?;
                SizeSpec::Box { lx, ly }
            }
            _ => return cfg_err("geometry", "exactly one of `spins` and `box` is required"),
        };
        if let Some(r) = g.removal {
            let (name, v) = match r {
                RemovalModel::Shelving { r_shelve } => ("r_shelve", r_shelve),
                RemovalModel::Depolarization { r_depol } => ("r_depol", r_depol),
                RemovalModel::HardCutoff { r_min } => ("r_min", r_min),
            };
            if !(v.is_finite() && v >= 0.0) {
                return cfg_err(&format!("geometry.removal.{name}"), "must be non-negative");
            }
        }
        Ok(GeometrySpec { density, thickness: g.thickness, size, removal: g.removal, j0: g.j0 })
    }

    fn quench(&self, kind: Kind) -> Result<QuenchPlan, CliError> {
        let geometry = self.geometry()?;
        let Some(engine) = &self.engine else {
            return cfg_err("engine", format!("required for {kind:?} runs").to_lowercase());
        };
        let engine = match *engine {
            Engine::Exact { samples, max_spins, krylov_tol, krylov_dim } => {
                if samples == 0 {
                    return cfg_err("engine.samples", "must be at least 1");
                }
                let mut krylov = KrylovParams::default();
                if let Some(t) = krylov_tol {
                    positive(t, "engine.krylov_tol")?;
                    krylov.tol = t;
                }
                if let Some(m) = krylov_dim {
                    if m < 2 {
                        return cfg_err("engine.krylov_dim", "must be at least 2");
                    }
                    krylov.max_dim = m;
                }
                if let SizeSpec::Active { n } = geometry.size {
                    if n > max_spins {
                        return Err(CliError::Core(dipolar_squeeze::Error::CapacityExceeded { n, max: max_spins }));
                    }
                }
                EngineSpec::Exact { krylov, max_spins, samples }
            }
            Engine::Dtwa { trajectories, steps_per_unit, max_cluster_size } => {
                if trajectories == 0 {
                    return cfg_err("engine.trajectories", "must be at least 1");
                }
                let mut params = DtwaParams::default();
                if let Some(s) = steps_per_unit {
                    positive(s, "engine.steps_per_unit")?;
                    params.steps_per_unit = s;
                }
                if let Some(c) = max_cluster_size {
                    if !(1..=2).contains(&c) {
                        return cfg_err("engine.max_cluster_size", "must be 1 or 2");
                    }
                    params.max_cluster_size = c;
                }
                EngineSpec::Dtwa { params, trajectories }
            }
        };
        if !(0.0..=1.0).contains(&self.eta) {
            return cfg_err("eta", format!("must lie in [0, 1], got {}", self.eta));
        }
        if self.realizations == 0 {
            return cfg_err("realizations", "must be at least 1");
        }
        Ok(QuenchPlan { geometry, engine, eta: self.eta, realizations: self.realizations, seed: self.seed })
    }

    fn twist(&self, kind: Kind) -> Result<(f64, Vec<f64>), CliError> {
        let Some(t) = &self.twist else {
            return cfg_err("twist", format!("required for {kind:?} runs").to_lowercase());
        };
        if !(t.phi.is_finite() && t.phi != 0.0) {
            return cfg_err("twist.phi", "must be finite and non-zero");
        }
        Ok((t.phi, checked(t.times.values(), "twist.times")?))
    }

    fn thetas(&self, kind: Kind) -> Result<Vec<f64>, CliError> {
        Ok(grid(&self.grids.theta, "grids.theta", kind)?.into_iter().map(|x| x * PI).collect())
    }

    fn squeeze_plan(&self, kind: Kind) -> Result<SqueezePlan, CliError> {
        let quench = self.quench(kind)?;
        let (twist_phi, twist_times) = self.twist(kind)?;
        let t_g = grid(&self.grids.t_g, "grids.t_g", kind)?;
        let theta = self.thetas(kind)?;
        let t_r = grid(&self.grids.t_r, "grids.t_r", kind)?;
        if t_r[0] != 0.0 {
            return cfg_err("grids.t_r", "must start at 0");
        }
        let Some(fit) = &self.fit else {
            return cfg_err("fit", format!("required for {kind:?} runs").to_lowercase());
        };
        if fit.t_max.is_empty() {
            return cfg_err("fit.t_max", "at least one window is required");
        }
        for (k, &t) in fit.t_max.iter().enumerate() {
            positive(t, &format!("fit.t_max[{k}]"))?;
        }
        let p_mode = match fit.p {
            Some(p) => {
                positive(p, "fit.p")?;
                PMode::Fixed { p }
            }
            None => {
                let [lo, hi] = fit.p_bounds;
                if !(lo > 0.0 && hi > lo) {
                    return cfg_err("fit.p_bounds", "must satisfy 0 < lo < hi");
                }
                PMode::Global { lo, hi }
            }
        };
        positive(fit.map_tolerance, "fit.map_tolerance")?;
        Ok(SqueezePlan {
            quench,
            t_g,
            theta,
            t_r,
            twist_phi,
            twist_times,
            t_max: fit.t_max.clone(),
            p_mode,
            window_start: fit.window_start,
            shared_p: fit.shared_p,
            map_tolerance: fit.map_tolerance,
            map_mode: fit.map_mode,
        })
    }

    pub fn resolve(&self, kind: Kind) -> Result<Resolved, CliError> {
        if self.version != SCHEMA_VERSION {
            return cfg_err("version", format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.version));
        }
        Ok(match kind {
            Kind::Ensemble => {
                if self.realizations == 0 {
                    return cfg_err("realizations", "must be at least 1");
                }
                Resolved::Ensemble { geometry: self.geometry()?, realizations: self.realizations, seed: self.seed }
            }
            Kind::Twist => {
                let quench = self.quench(kind)?;
                let (phi, times) = self.twist(kind)?;
                Resolved::Twist { quench, phi, times }
            }
            Kind::Generation => {
                let quench = self.quench(kind)?;
                Resolved::Generation { quench, t_g: grid(&self.grids.t_g, "grids.t_g", kind)? }
            }
            Kind::Readout => {
                let quench = self.quench(kind)?;
                let t_g = grid(&self.grids.t_g, "grids.t_g", kind)?;
                let theta = self.thetas(kind)?;
                Resolved::Readout { quench, t_g, theta, t_r: grid(&self.grids.t_r, "grids.t_r", kind)? }
            }
            Kind::Map => Resolved::Map { plan: self.squeeze_plan(kind)? },
            Kind::Squeeze => Resolved::Squeeze { plan: self.squeeze_plan(kind)? },
            Kind::Crossover => {
                let g = self.geometry()?;
                let Some(c) = &self.crossover else {
                    return cfg_err("crossover", "required for crossover runs");
                };
                if c.r_min.is_empty() {
                    return cfg_err("crossover.r_min", "at least one radius is required");
                }
                for (k, &r) in c.r_min.iter().enumerate() {
                    positive(r, &format!("crossover.r_min[{k}]"))?;
                }
                let times = checked(c.times.values(), "crossover.times")?;
                if times[0] < 0.0 {
                    return cfg_err("crossover.times", "must be non-negative");
                }
                Resolved::Crossover { density: g.density, j0: g.j0, r_min: c.r_min.clone(), times }
            }
        })
    }
}
