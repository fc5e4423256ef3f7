use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
version = 1
seed = 5
realizations = 3
eta = 0.8

[geometry]
density_ppm_nm = 8.0
thickness = 7.0
spins = 8

[geometry.removal]
kind = "shelving"
r_shelve = 7.0

[engine]
kind = "dtwa"
trajectories = 80
steps_per_unit = 20.0

[grids]
t_g = [0.8, 1.6]
theta = { from = 0.0, to = 0.8333333333333334, points = 6 }
t_r = { from = 0.0, to = 8.0, points = 41 }

[twist]
phi = 0.3
times = { from = 0.0, to = 1.0, points = 11 }

[fit]
t_max = [6.0, 8.0]
window_start = 1.6
map_tolerance = 1.0
map_mode = "per_slice"

[crossover]
r_min = [4.0, 8.0]
times = { from = 0.0, to = 2.0, points = 9 }
"#;

fn dsq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsq")).args(args).output().expect("dsq runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

fn run(kind: &str, text: &str, extra: &[&str]) -> (Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), text);
    let out = dir.path().join("out");
    let mut args = vec![kind, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    (dsq(&args), dir)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn empty_theta_grid_is_a_config_error() {
    let (o, _d) = run("readout", &SMALL.replace("theta = { from = 0.0, to = 0.8333333333333334, points = 6 }", "theta = []"), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("grids.theta"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_are_rejected_with_their_path() {
    let (o, _d) = run("generation", &SMALL.replace("[engine]\n", "[engine]\nsteps = 3\n"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("engine"), "{}", stderr(&o));
    let (o, _d) = run("generation", &SMALL.replace("r_shelve = 7.0", "r_shelve = 7.0\nradius = 2.0"), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn capacity_overflow_exits_with_config_code() {
    let text = SMALL
        .replace("spins = 8", "spins = 40")
        .replace("kind = \"dtwa\"\ntrajectories = 80\nsteps_per_unit = 20.0", "kind = \"exact\"");
    let (o, _d) = run("generation", &text, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("capacity"), "{}", stderr(&o));
}

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    for kind in ["generation", "readout", "twist", "squeeze"] {
        let (a, da) = run(kind, SMALL, &["--threads", "1"]);
        let (b, db) = run(kind, SMALL, &["--threads", "3"]);
        assert!(a.status.success() && b.status.success(), "{kind}: {}{}", stderr(&a), stderr(&b));
        let (oa, ob) = (da.path().join("out"), db.path().join("out"));
        let (fa, fb) = (outputs(&oa), outputs(&ob));
        assert!(!fa.is_empty());
        assert_eq!(fa.iter().map(|f| &f.0).collect::<Vec<_>>(), fb.iter().map(|f| &f.0).collect::<Vec<_>>());
        for ((name, x), (_, y)) in fa.iter().zip(&fb) {
            assert!(x == y, "{kind}: {name} differs between thread counts");
        }
        let (ma, mb) = (manifest(&oa), manifest(&ob));
        assert_eq!(ma["config_sha256"], mb["config_sha256"]);
        assert_eq!(ma["threads"], 1);
        assert_eq!(mb["threads"], 3);
    }
}

#[test]
fn seed_flag_changes_results_and_hash() {
    let (a, da) = run("generation", SMALL, &[]);
    let (b, db) = run("generation", SMALL, &["--seed", "6"]);
    assert!(a.status.success() && b.status.success());
    let (ma, mb) = (manifest(&da.path().join("out")), manifest(&db.path().join("out")));
    assert_ne!(ma["config_sha256"], mb["config_sha256"]);
    assert_eq!(mb["seed"], 6);
    assert_ne!(outputs(&da.path().join("out")), outputs(&db.path().join("out")));
}

#[test]
fn rows_carry_provenance() {
    let (o, d) = run("generation", SMALL, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("out/generation.csv")).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap();
    assert!(header.ends_with("seed,realizations,members"), "{header}");
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with(",5,3,80")));
    let m = manifest(&d.path().join("out"));
    assert_eq!(m["realization_seeds"].as_array().unwrap().len(), 3);
    assert_eq!(m["files"][0], "generation.csv");
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn ensemble_and_crossover_runs() {
    let (o, d) = run("ensemble", SMALL, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("out/ensemble.csv")).unwrap();
    let rows: Vec<_> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.split(',').nth(3) == Some("8")));

    let (o, d) = run("crossover", SMALL, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(d.path().join("out/crossover.json")).unwrap()).unwrap();
    let t4 = v[0]["crossover_time"].as_f64().unwrap();
    let t8 = v[1]["crossover_time"].as_f64().unwrap();
    assert!((t8 / t4 - 8.0).abs() < 1e-6);
}

#[test]
fn shelving_recipe_runs_end_to_end() {
    let recipe = Path::new(env!("CARGO_MANIFEST_DIR")).join("recipes/shelving_7nm.toml");
    let dir = tempfile::tempdir().unwrap();
    let o = dsq(&["squeeze", "--config", recipe.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("xi2.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r[1].is_finite() && r[1] > 0.0));
}
