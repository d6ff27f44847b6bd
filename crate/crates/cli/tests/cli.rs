//! End-to-end runs of the `fracpme` binary.

use fracpme_cli::snapshot::parse_rows;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fracpme(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracpme"))
        .args(args)
        .arg("--quiet")
        .current_dir(dir)
        .env("FRACPME_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn aux_solve_with_zero_data_gives_zero_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "aux.cfg", "R = 4\nm = 2\nepsilon = 0.1\ndx = 0.5\n[initial]\nprofile = constant\nvalue = 0\n");
    let out = fracpme(&["aux-solve", "--config", &cfg, "--output", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let field = fs::read_to_string(tmp.path().join("out/field.csv")).unwrap();
    assert!(field.starts_with("x,y,w\n"));
    let rows = parse_rows(&field).unwrap();
    assert!(rows.iter().all(|r| r[2] == 0.0));
    let report = fs::read_to_string(tmp.path().join("out/report.txt")).unwrap();
    assert!(report.contains("overall: PASS"));
}

#[test]
fn evolve_writes_traces_diagnostics_and_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "run.cfg",
        "mode = evolve\nR = 4\nT = 0.2\nm = 2\nepsilon = 0.05\ndx = 0.25\nrho = power-decay\nalpha = 2\n",
    );
    let out = fracpme(&["evolve", "--config", &cfg, "--output", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let d = fs::read_to_string(tmp.path().join("out/diagnostics.csv")).unwrap();
    assert!(d.starts_with("t,energy,lyapunov,mass,iterations\n"));
    assert_eq!(parse_rows(&d).unwrap().len(), 5);
    assert!(tmp.path().join("out/trace/u_00004.csv").exists());
    let w = parse_rows(&fs::read_to_string(tmp.path().join("out/w_final.csv")).unwrap()).unwrap();
    assert_eq!(w.len(), 33 * w.iter().filter(|r| r[0] == 0.0).count());
    let report = fs::read_to_string(tmp.path().join("out/report.txt")).unwrap();
    assert!(report.contains("density = power-decay(alpha=2)"));
    assert!(report.contains("grade=1.1"));
}

#[test]
fn file_profile_is_interpolated() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "u0.csv", "x,value\n-1,0\n0,2\n1,0\n");
    let cfg = write(tmp.path(), "aux.cfg", "R = 2\nm = 1\ndx = 0.5\nu0 = u0.csv\n");
    let out = fracpme(&["aux-solve", "--config", &cfg, "--output", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(tmp.path().join("out/report.txt")).unwrap();
    assert!(report.contains("initial = table(3 points)"));
}

#[test]
fn config_errors_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.cfg", "R = 4\nsigma = 1\n");
    let out = fracpme(&["evolve", "--config", &cfg], tmp.path());
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 2") && msg.contains("'sigma'"), "{msg}");

    let cfg = write(tmp.path(), "mismatch.cfg", "mode = verify\n");
    assert_eq!(fracpme(&["evolve", "--config", &cfg], tmp.path()).status.code(), Some(3));
}

#[test]
fn verify_status_is_the_conjunction_of_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fracpme(&["verify", "--seed", "3", "--output", "a"], tmp.path());
    let report = fs::read_to_string(tmp.path().join("a/report.txt")).unwrap();
    let failed: Vec<&str> = report.lines().filter(|l| l.starts_with("FAIL ")).collect();
    let expected = if failed.is_empty() { 0 } else { 2 };
    assert_eq!(out.status.code(), Some(expected), "{report}");
    // the flux-decay products grow like log R; every other check passes
    assert_eq!(failed.len(), 1, "{report}");
    assert!(failed[0].starts_with("FAIL flux-decay-products"));
}

#[test]
fn verify_reports_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    fracpme(&["verify", "--seed", "11", "--output", "a"], tmp.path());
    let out = Command::new(env!("CARGO_BIN_EXE_fracpme"))
        .args(["verify", "--seed", "11", "--output", "b", "--quiet"])
        .current_dir(tmp.path())
        .env("FRACPME_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.code().is_some());
    let a = fs::read(tmp.path().join("a/report.txt")).unwrap();
    let b = fs::read(tmp.path().join("b/report.txt")).unwrap();
    assert_eq!(a, b);
    fracpme(&["verify", "--seed", "12", "--output", "c"], tmp.path());
    assert_ne!(a, fs::read(tmp.path().join("c/report.txt")).unwrap());
}

#[test]
fn probe_writes_polar_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "p.cfg", "[probe]\nradii = 4, 8\nntheta = 17\n");
    let out = fracpme(&["probe-barrier", "--config", &cfg, "--output", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let psi = fs::read_to_string(tmp.path().join("out/psi_R8.csv")).unwrap();
    assert!(psi.starts_with("r,theta,psi\n"));
    assert_eq!(parse_rows(&psi).unwrap().len(), 145 * 17);
}

#[test]
fn converge_table_decreases() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.cfg", "[converge]\nR = 20\nspacing = 0.4\nepsilon = 0.1\nlevels = 3\n");
    let out = fracpme(&["converge", "--config", &cfg, "--output", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let report = fs::read_to_string(tmp.path().join("out/report.txt")).unwrap();
    assert!(report.contains("PASS error-decreases"), "{report}");
    assert!(report.contains("spacing,epsilon,sup_error,energy_ratio"));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fracpme"))
        .args(["verify", "--quiet"])
        .current_dir(tmp.path())
        .env("FRACPME_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
