//! `dsq`: run squeezing experiments from a TOML configuration.

mod config;
mod error;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{Kind, Resolved, SCHEMA_VERSION};
use error::CliError;
use output::{sha256_hex, Manifest, Sink};

#[derive(Parser)]
#[command(name = "dsq", version, about = "Spin squeezing in disordered dipolar ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample disorder realizations and report their geometry.
    Ensemble(Args),
    /// Tip the polarized state and calibrate the twisting strength.
    Twist(Args),
    /// Collective moments after the generation quench.
    Generation(Args),
    /// Readout decays for every generation time and rotation angle.
    Readout(Args),
    /// Fit readout decays and build variance maps.
    Map(Args),
    /// Full pipeline: maps plus extracted squeezing parameters.
    Squeeze(Args),
    /// Early-time decay law with a minimum pair distance.
    Crossover(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Ensemble(a) => (Kind::Ensemble, a),
        Command::Twist(a) => (Kind::Twist, a),
        Command::Generation(a) => (Kind::Generation, a),
        Command::Readout(a) => (Kind::Readout, a),
        Command::Map(a) => (Kind::Map, a),
        Command::Squeeze(a) => (Kind::Squeeze, a),
        Command::Crossover(a) => (Kind::Crossover, a),
    };
    match run(kind, &args) {
        Ok(dir) => {
            eprintln!("results written to {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn seed_of(r: &Resolved) -> (u64, usize) {
    match r {
        Resolved::Ensemble { seed, realizations, .. } => (*seed, *realizations),
        Resolved::Twist { quench, .. } | Resolved::Generation { quench, .. } | Resolved::Readout { quench, .. } => {
            (quench.seed, quench.realizations)
        }
        Resolved::Map { plan } | Resolved::Squeeze { plan } => (plan.quench.seed, plan.quench.realizations),
        Resolved::Crossover { .. } => (0, 0),
    }
}

fn run(kind: Kind, args: &Args) -> Result<PathBuf, CliError> {
    let start = Instant::now();
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::io(format!("reading {}", args.config.display()), e))?;
    let mut cfg = config::parse(&text)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let resolved = cfg.resolve(kind)?;
    let dir = match (&args.out, &cfg.output.dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => args.config.parent().unwrap_or(".".as_ref()).join(d),
        (None, None) => return Err(CliError::Config { path: "output.dir".into(), msg: "no output directory; set it or pass --out".into() }),
    };
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config { path: "--threads".into(), msg: "must be at least 1".into() });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config { path: "--threads".into(), msg: e.to_string() })?;
    }
    let mut sink = Sink::new(&dir)?;
    run::execute(&resolved, &mut sink)?;

    let canonical = serde_json::to_vec(&resolved).expect("config serializes");
    let (seed, realizations) = seed_of(&resolved);
    let files = sink.files().to_vec();
    let kind_name = serde_json::to_value(kind).expect("kind serializes");
    let manifest = Manifest {
        kind: kind_name.as_str().unwrap_or_default(),
        version: env!("CARGO_PKG_VERSION"),
        schema_version: SCHEMA_VERSION,
        config_sha256: sha256_hex(&canonical),
        seed,
        realization_seeds: run::realization_seeds(seed, realizations),
        threads: rayon::current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
        files: &files,
    };
    sink.json("manifest.json", &manifest)?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
version = 1
seed = 3
realizations = 2
eta = 0.8
[geometry]
density_ppm_nm = 8.0
thickness = 7.0
spins = 6
[geometry.removal]
kind = "shelving"
r_shelve = 7.0
[engine]
kind = "dtwa"
trajectories = 64
[grids]
t_g = [0.5, 1.0]
theta = { from = 0.0, to = 0.8333333333333334, points = 6 }
t_r = { from = 0.0, to = 4.0, points = 41 }
[twist]
phi = 0.3
times = [0.0, 0.05, 0.1, 0.15, 0.2]
[fit]
t_max = [3.0, 4.0]
map_tolerance = 1.0
"#;

    fn hash(text: &str, kind: Kind) -> String {
        let r = config::parse(text).unwrap().resolve(kind).unwrap();
        sha256_hex(&serde_json::to_vec(&r).unwrap())
    }

    #[test]
    fn hash_ignores_formatting_and_unrelated_sections() {
        let a = hash(BASE, Kind::Generation);
        let reformatted = BASE.replace("thickness = 7.0", "thickness = 7.0   # nm").replace("spins = 6", "spins=6");
        assert_eq!(a, hash(&reformatted, Kind::Generation));
        let other_fit = BASE.replace("t_max = [3.0, 4.0]", "t_max = [5.0]");
        assert_eq!(a, hash(&other_fit, Kind::Generation));
        let explicit_default = BASE.replace("[geometry]\n", "[geometry]\ncarbon_density = 176.2\n");
        assert_eq!(a, hash(&explicit_default, Kind::Generation));
    }

    #[test]
    fn hash_tracks_meaningful_fields() {
        let a = hash(BASE, Kind::Squeeze);
        for (from, to) in [
            ("seed = 3", "seed = 4"),
            ("eta = 0.8", "eta = 0.7"),
            ("r_shelve = 7.0", "r_shelve = 6.0"),
            ("trajectories = 64", "trajectories = 65"),
            ("t_max = [3.0, 4.0]", "t_max = [3.0]"),
            ("points = 6", "points = 7"),
        ] {
            assert_ne!(a, hash(&BASE.replace(from, to), Kind::Squeeze), "{from} -> {to}");
        }
    }

    #[test]
    fn errors_name_the_offending_key() {
        let err = config::parse(&BASE.replace("spins = 6", "spins = 6\nspinz = 3")).unwrap_err();
        assert!(err.to_string().contains("geometry"), "{err}");
        let err = config::parse(&BASE.replace("trajectories = 64", "trajectories = -1")).unwrap_err();
        assert!(err.to_string().contains("engine"), "{err}");
        let err = config::parse(&BASE.replace("version = 1\n", "")).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
        let cfg = config::parse(&BASE.replace("t_g = [0.5, 1.0]", "t_g = []")).unwrap();
        let err = cfg.resolve(Kind::Squeeze).unwrap_err();
        assert!(err.to_string().contains("grids.t_g") && err.exit_code() == 2, "{err}");
        let cfg = config::parse(&BASE.replace("version = 1", "version = 2")).unwrap();
        assert!(cfg.resolve(Kind::Ensemble).unwrap_err().to_string().contains("version"));
    }

    #[test]
    fn exact_engine_capacity_is_a_config_failure() {
        let text = BASE
            .replace("spins = 6", "spins = 30")
            .replace("kind = \"dtwa\"\ntrajectories = 64", "kind = \"exact\"\nmax_spins = 20");
        let err = config::parse(&text).unwrap().resolve(Kind::Generation).unwrap_err();
        assert!(matches!(err, CliError::Core(dipolar_squeeze::Error::CapacityExceeded { n: 30, max: 20 })));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn recipes_resolve_for_every_pipeline_kind() {
        for text in [
            include_str!("../recipes/disordered.toml"),
            include_str!("../recipes/shelving_7nm.toml"),
            include_str!("../recipes/shelving_6nm.toml"),
            include_str!("../recipes/depolarization_14nm.toml"),
        ] {
            let cfg = config::parse(text).unwrap();
            for kind in [Kind::Ensemble, Kind::Twist, Kind::Generation, Kind::Readout, Kind::Map, Kind::Squeeze] {
                cfg.resolve(kind).unwrap();
            }
        }
    }

    #[test]
    fn missing_sections_are_reported_per_kind() {
        let text = BASE.split("[twist]").next().unwrap().to_string();
        let cfg = config::parse(&text).unwrap();
        assert!(cfg.resolve(Kind::Generation).is_ok());
        let err = cfg.resolve(Kind::Squeeze).unwrap_err();
        assert!(err.to_string().contains("`twist`"), "{err}");
    }
}
