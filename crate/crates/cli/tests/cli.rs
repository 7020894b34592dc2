use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"
t_end = 0.1
dt = 0.01

[initial]
linear = [0.3, 0.0, 0.2]
angular = [0.0, 0.2, 0.1]
profiles = [{ kind = "swirl", amplitude = 1.0, axis = [0.0, 0.0, 1.0] }]

[viscous]
nu = 0.01
basis_size = 14
"#;

const RING: &str = r#"
solver = "euler"
t_end = 0.1
dt = 0.05

[initial.ring]
center = [0.0, 0.0, 3.0]
axis = [0.0, 0.0, 1.0]
radius = 1.0
circulation = 1.0
particles = 12
"#;

fn rigidflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rigidflow"))
        .args(args)
        .current_dir(dir)
        .env_remove("RIGIDFLOW_OUT")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn invalid_value_exits_2_with_line_and_field() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "c.toml", "t_end = 1.0\ndt = 0.1\n\n[viscous]\nnu = -1.0\n");
    let o = rigidflow(d.path(), &["run", "-c", &c]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 5") && e.contains("viscous.nu"), "{e}");
}

#[test]
fn unknown_key_and_syntax_error_exit_2_with_line() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "c.toml", "t_end = 1.0\ndt = 0.1\n[body]\nradius = 1.0\ncolour = 2\n");
    let o = rigidflow(d.path(), &["run", "-c", &c]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 5") && stderr(&o).contains("colour"), "{}", stderr(&o));
    let c = write(d.path(), "d.toml", "t_end = 1.0\ndt = \n");
    let o = rigidflow(d.path(), &["run", "-c", &c]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    let o = rigidflow(d.path(), &["run", "-c", "missing.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_artifacts_and_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "c.toml", SMALL);
    for out in ["a", "b"] {
        let o = rigidflow(d.path(), &["run", "-c", &c, "--seed", "7", "--output-dir", out]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["summary.json", "ledger.csv", "motion.csv", "trajectory.rgf"] {
        let a = std::fs::read(d.path().join("a").join(f)).unwrap();
        let b = std::fs::read(d.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let s = json(&d.path().join("a/summary.json"));
    assert_eq!(s["seed"], 7);
    assert_eq!(s["samples"], 11);
    let ledger = std::fs::read_to_string(d.path().join("a/ledger.csv")).unwrap();
    let energy: Vec<f64> = ledger.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(energy.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn output_directory_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "c.toml", SMALL);
    let o = Command::new(env!("CARGO_BIN_EXE_rigidflow"))
        .args(["run", "-c", &c])
        .current_dir(d.path())
        .env("RIGIDFLOW_OUT", d.path().join("env"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(d.path().join("env/summary.json").exists());
    assert!(!d.path().join("out").exists());
}

#[test]
fn single_point_sweep_aggregate_matches_point() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "c.toml", SMALL);
    let o = rigidflow(d.path(), &["sweep", "-c", &c, "--set", "sweep.nu_grid=[0.02]", "--output-dir", "s"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let points = std::fs::read_to_string(d.path().join("s/points.csv")).unwrap();
    let rates = std::fs::read_to_string(d.path().join("s/rates.csv")).unwrap();
    assert_eq!(points, rates);
    let p = json(&d.path().join("s/points/rule0_nu0.json"));
    let s = json(&d.path().join("s/summary.json"));
    assert_eq!(s["reports"][0]["points"][0], p);
    assert!(s["slope"].is_null());
}

#[test]
fn four_point_sweep_reports_slope_and_plot() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "c.toml", SMALL);
    let o = rigidflow(d.path(), &["sweep", "-c", &c, "--workers", "2", "--output-dir", "s"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(&d.path().join("s/summary.json"));
    assert!(s["slope"].as_f64().unwrap() > 0.0);
    assert_eq!(s["reports"][0]["points"].as_array().unwrap().len(), 4);
    assert!(std::fs::read_to_string(d.path().join("s/rates.svg")).unwrap().contains("slope"));
}

#[test]
fn failed_sweep_keeps_completed_rows() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "c.toml", SMALL);
    let o = rigidflow(
        d.path(),
        &["sweep", "-c", &c, "--set", "sweep.nu_grid=[0.2,0.00001]", "--set", "sweep.alphas=[\"nu_pow:-2\"]", "--output-dir", "s"],
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let rows = std::fs::read_to_string(d.path().join("s/points.csv")).unwrap();
    let lines: Vec<&str> = rows.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("0,2.0000000000000001e-1,"));
    assert!(!d.path().join("s/summary.json").exists());
}

#[test]
fn added_mass_of_unit_sphere() {
    let d = tempfile::tempdir().unwrap();
    let o = rigidflow(d.path(), &["added-mass", "--output-dir", "m"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(&d.path().join("m/added_mass.json"));
    assert_eq!(s["path"], "analytic");
    let m2 = &s["m2"];
    for i in 0..6 {
        for j in 0..6 {
            let expect = if i == j && i < 3 { 2.0 * std::f64::consts::PI / 3.0 } else { 0.0 };
            assert!((m2[i][j].as_f64().unwrap() - expect).abs() < 1e-10);
        }
    }
}

#[test]
fn verify_suite_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = rigidflow(d.path(), &["verify", "--pairs", "6", "--seed", "3", "--output-dir", "v"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = json(&d.path().join("v/verify.json"));
    assert_eq!(s["passed"], true);
    assert_eq!(s["pairs"], 6);
}

#[test]
fn euler_conservation_failures_map_to_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let c = write(d.path(), "c.toml", RING);
    let o = rigidflow(d.path(), &["run", "-c", &c, "--set", "euler.energy_tol=1e-15", "--output-dir", "e"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    let s = json(&d.path().join("e/summary.json"));
    assert!(s["status"].as_str().unwrap().contains("ledger"));
    let o = rigidflow(d.path(), &["run", "-c", &c, "--set", "euler.bc_tol=1e-30", "--output-dir", "f"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = rigidflow(d.path(), &["run", "-c", &c, "--output-dir", "g"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}
