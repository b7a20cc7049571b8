use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_bloch-plasmon");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(BIN).args(args).arg("--output-dir").arg(out).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

fn f(r: &csv::StringRecord, i: usize) -> f64 {
    r[i].parse().unwrap()
}

const CIRCLE: &str = r#"
alpha = [1.5707963267948966, 1.0471975511965976]

[geometry]
shape = "circle"
radius = 0.2
n = 128

[materials]
eps_m = 1.0
mu_m = 1.0
eps_c = [-2.0, 0.1]
mu_c = [-1.5, 0.1]

[source]
moment = [1.0, 0.5]
position = [0.1, 0.15]

[solver]
omega = 0.05

[output]
grid_spacing = 0.01
field_spacing = 0.125
"#;

#[test]
fn spectrum_starts_with_the_distinguished_eigenvalue() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", CIRCLE);
    let o = run(&["spectrum", cfg.to_str().unwrap()], &tmp.path().join("a"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = rows(&tmp.path().join("a/spectrum.csv"));
    assert_eq!(r.len(), 128);
    assert_eq!(&r[0][0], "0");
    assert!((f(&r[0], 1) - 0.5).abs() < 5e-3);
    assert_eq!(&r[0][2], "true");
    assert_eq!(r.iter().filter(|x| &x[2] == "true").count(), 32);
}

#[test]
fn spectrum_trusted_rows_are_stable_under_doubling() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", CIRCLE);
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&run(&["spectrum", c], &tmp.path().join("a"))), 0);
    assert_eq!(code(&run(&["spectrum", c, "--set", "geometry.n=256"], &tmp.path().join("b"))), 0);
    let coarse = rows(&tmp.path().join("a/spectrum.csv"));
    let fine: Vec<f64> = rows(&tmp.path().join("b/spectrum.csv")).iter().map(|r| f(r, 1)).collect();
    for r in coarse.iter().filter(|r| &r[2] == "true") {
        let l = f(r, 1);
        let gap = fine.iter().map(|m| (m - l).abs()).fold(f64::INFINITY, f64::min);
        assert!(gap < 1e-4, "lambda {l} drifts by {gap}");
    }
}

#[test]
fn missing_geometry_fails_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let body = CIRCLE.replace("[geometry]\nshape = \"circle\"\nradius = 0.2\nn = 128\n", "");
    let cfg = write_config(tmp.path(), "c.toml", &body);
    let out = tmp.path().join("out");
    let o = run(&["spectrum", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("geometry"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn all_validation_problems_are_reported_with_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let body = CIRCLE
        .replace("radius = 0.2", "radius = \"big\"")
        .replace("eps_m = 1.0", "eps_m = -1.0")
        .replace("omega = 0.05", "omega = 0.05\nbackend = \"magic\"");
    let cfg = write_config(tmp.path(), "c.toml", &body);
    let o = run(&["solve", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    let line_of = |needle: &str| body.lines().position(|l| l.contains(needle)).unwrap() + 1;
    assert!(err.contains(&format!("line {}: geometry.radius", line_of("radius = \"big\""))), "{err}");
    assert!(err.contains(&format!("line {}: materials.eps_m", line_of("eps_m = -1.0"))), "{err}");
    assert!(err.contains(&format!("line {}: solver.backend", line_of("backend"))), "{err}");
}

#[test]
fn overrides_are_validated_and_named() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", CIRCLE);
    let o = run(&["spectrum", cfg.to_str().unwrap(), "--set", "geometry.n=15"], &tmp.path().join("out"));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("must be even"), "{}", stderr(&o));
    let o = run(&["spectrum", cfg.to_str().unwrap(), "--set", "solver.eta0=-1"], &tmp.path().join("out"));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--set solver.eta0"), "{}", stderr(&o));
    let o = run(&["spectrum", cfg.to_str().unwrap(), "--set", "geometry.typo=1"], &tmp.path().join("out"));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown key"), "{}", stderr(&o));
}

#[test]
fn solve_writes_tables_and_a_consistent_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &CIRCLE.replace("n = 128", "n = 256").replace("grid_spacing = 0.01", "grid_spacing = 0.005"));
    let out = tmp.path().join("out");
    let o = run(&["solve", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let e = rows(&out.join("energy.csv"));
    let header = csv::Reader::from_path(out.join("energy.csv")).unwrap().headers().unwrap().clone();
    let col = header.iter().position(|h| h == "discrepancy").unwrap();
    assert!(f(&e[0], col) < 0.02);
    assert!(f(&e[0], 1) > 0.0);
    let nf = rows(&out.join("near_field.csv"));
    assert_eq!(nf.len(), 64);
    assert!(nf.iter().any(|r| &r[4] == "inclusion") && nf.iter().any(|r| &r[4] == "matrix"));
    assert_eq!(rows(&out.join("densities.csv")).len(), 256);
    assert_eq!(rows(&out.join("resonance.csv")).len(), 64);
}

#[test]
fn zero_dipole_gives_zero_field_and_energy() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", &CIRCLE.replace("moment = [1.0, 0.5]", "moment = [0.0, 0.0]"));
    let out = tmp.path().join("out");
    let o = run(&["solve", cfg.to_str().unwrap()], &out);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(rows(&out.join("near_field.csv")).iter().all(|r| f(r, 2) == 0.0 && f(r, 3) == 0.0));
    assert_eq!(f(&rows(&out.join("energy.csv"))[0], 1), 0.0);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", CIRCLE);
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&run(&["solve", c], &tmp.path().join("a"))), 0);
    assert_eq!(code(&run(&["solve", c, "--threads", "2"], &tmp.path().join("b"))), 0);
    for name in ["densities.csv", "near_field.csv", "energy.csv", "resonance.csv"] {
        let a = fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = fs::read(tmp.path().join("b").join(name)).unwrap();
        assert!(a == b, "{name} differs between runs");
    }
}

#[test]
fn wood_anomaly_is_a_numerical_failure() {
    let tmp = tempfile::tempdir().unwrap();
    // |alpha|^2 = 0.005 = k_m^2
    let body = CIRCLE.replace("alpha = [1.5707963267948966, 1.0471975511965976]", "alpha = [0.05, 0.05]").replace(
        "omega = 0.05",
        "omega = 0.070710678118654752",
    );
    let cfg = write_config(tmp.path(), "c.toml", &body);
    let o = run(&["solve", cfg.to_str().unwrap()], &tmp.path().join("out"));
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("Wood"), "{}", stderr(&o));
}

#[test]
fn verify_passes_on_defaults_and_flags_coarse_grids() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", CIRCLE);
    let c = cfg.to_str().unwrap();
    let o = run(&["verify", c], &tmp.path().join("a"));
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert!(!stdout(&o).contains("FAIL"));
    let o = run(&["verify", c, "--set", "geometry.n=16"], &tmp.path().join("b"));
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("FAIL"));
    let r = rows(&tmp.path().join("b/verify.csv"));
    assert!(r.iter().any(|x| &x[3] == "false"));

    let empty = write_config(tmp.path(), "e.toml", "");
    assert_eq!(code(&run(&["verify", empty.to_str().unwrap()], &tmp.path().join("c"))), 2);
}

#[test]
fn sweep_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("ellipse_drude.toml");
    let c = cfg.to_str().unwrap();
    let o = run(&["sweep", c, "--set", "sweep.points=1", "--set", "geometry.n=64"], &tmp.path().join("one"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(rows(&tmp.path().join("one/sweep.csv")).len(), 1);
    assert!(stdout(&o).contains("no fit"));
    // filling factors far below the feasible window: every point fails
    let o = run(
        &["sweep", c, "--set", "sweep.axis=\"filling\"", "--set", "sweep.start=0.01", "--set", "sweep.stop=0.02", "--set", "geometry.n=64"],
        &tmp.path().join("bad"),
    );
    assert_eq!(code(&o), 5, "{}", stderr(&o));
    let r = rows(&tmp.path().join("bad/sweep.csv"));
    assert_eq!(r.len(), 5);
    assert!(r.iter().all(|x| &x[11] == "false" && !x[12].is_empty()));
}

#[test]
fn design_round_trip_and_infeasible_bracket() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("ellipse_drude.toml");
    let c = cfg.to_str().unwrap();
    let o = run(&["design", c, "--set", "geometry.n=64"], &tmp.path().join("a"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let tau = f(&rows(&tmp.path().join("a/design.csv"))[0], 1);
    let set = format!("materials.drude.tau={tau:e}");
    let o = run(&["design", c, "--set", "geometry.n=64", "--set", &set], &tmp.path().join("b"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let again = f(&rows(&tmp.path().join("b/design.csv"))[0], 1);
    assert!((again - tau).abs() < 1e-8 * tau, "{tau} {again}");

    let o = run(&["design", c, "--set", "geometry.n=64", "--set", "design.tau_max=10.0"], &tmp.path().join("c"));
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("achieved lambda"));
    assert!(!tmp.path().join("c").exists());
}
