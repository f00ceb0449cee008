use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use radial_cmc::io::{load_field_csv, save_field_csv};
use radial_cmc::{example1_pair, CapDomain, PolarGrid};

fn radial_cmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radial-cmc")).args(args).output().expect("binary runs")
}

fn demo_config(dir: &Path) -> String {
    let path = dir.join("demo.cfg");
    fs::write(&path, "# demo\nr = 0.8\nh_target = 0.5\nsubsolution = constant:0\nphi = 0\n").unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn demo_run_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_config(tmp.path());
    let out = tmp.path().join("out");
    let o = radial_cmc(&["--config", &cfg, "--out", out.to_str().unwrap(), "--grid", "16,32", "--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["solution.csv", "trace.csv", "certificates.txt", "surface.obj"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let u = load_field_csv(&out.join("solution.csv")).unwrap();
    assert_eq!(u.grid().n_theta(), 16);
    assert!(u.values().iter().all(|&v| v <= 0.0));
    let obj = fs::read_to_string(out.join("surface.obj")).unwrap();
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 1 + 16 * 32);
    let certs = fs::read_to_string(out.join("certificates.txt")).unwrap();
    assert!(certs.contains("height:") && certs.contains("gradient:"));
}

#[test]
fn identical_runs_give_identical_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_config(tmp.path());
    let mut traces = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let o = radial_cmc(&["--config", &cfg, "--out", out.to_str().unwrap(), "--grid", "12,24", "--quiet"]);
        assert_eq!(o.status.code(), Some(0));
        traces.push(fs::read(out.join("trace.csv")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn field_file_serves_as_subsolution() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_config(tmp.path());
    let grid = PolarGrid::new(CapDomain::from_circle_radius([0.0, 0.0, 1.0], 0.8).unwrap(), 12, 24).unwrap();
    let (inner, _) = example1_pair(0.8, 0.1, &grid).unwrap();
    let field = tmp.path().join("inner.csv");
    save_field_csv(&inner, &field).unwrap();
    let sub = format!("subsolution=file:{}", field.display());
    let out = tmp.path().join("out");
    let o = radial_cmc(&[
        "--config", &cfg, "--set", &sub, "--set", "h_target=0.3", "--out", out.to_str().unwrap(), "--grid", "12,24",
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let u = load_field_csv(&out.join("solution.csv")).unwrap();
    assert!(u.values().iter().zip(inner.values()).all(|(a, b)| *a <= *b + 1e-8));

    let o = radial_cmc(&["--config", &cfg, "--set", &sub, "--out", out.to_str().unwrap(), "--grid", "16,32", "--quiet"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn target_above_subsolution_curvature_is_a_hypothesis_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_config(tmp.path());
    let out = tmp.path().join("out");
    let o = radial_cmc(&["--config", &cfg, "--set", "h_target=2", "--out", out.to_str().unwrap(), "--grid", "8,16"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hypothesis"));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_config(tmp.path());
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = blocker.join("out");
    let o = radial_cmc(&["--config", &cfg, "--out", out.to_str().unwrap(), "--grid", "8,16", "--quiet"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn step_underflow_keeps_partial_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = demo_config(tmp.path());
    let out = tmp.path().join("out");
    let o = radial_cmc(&[
        "--config", &cfg, "--set", "max_newton_iters=1", "--set", "residual_tol=1e-14", "--set", "t_step_min=0.05",
        "--out", out.to_str().unwrap(), "--grid", "8,16", "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.lines().count() >= 2);
}

#[test]
fn usage_errors() {
    assert_eq!(radial_cmc(&["--bogus"]).status.code(), Some(1));
    assert_eq!(radial_cmc(&["--set", "r=0.8"]).status.code(), Some(1));
    assert_eq!(radial_cmc(&["--set", "nope=1", "--set", "h_target=0.5"]).status.code(), Some(1));
    assert_eq!(radial_cmc(&["--help"]).status.code(), Some(0));
}
