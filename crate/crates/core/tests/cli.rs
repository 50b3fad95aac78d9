use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use anharmonic::record::ResultRecord;

const STABILIZED: &str = "[model]\nm = 1\na = 1\nb1 = 1\nb2 = 1\nJ = 0.01\nd = 3\nbeta = 1\n";
const STRONG: &str = "[model]\nm = 1\na = 1\nb1 = 2\nb2 = 0.25\nJ = 0.5\nd = 3\nbeta = 4\n";

fn anharmonic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anharmonic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn records(out: &Output) -> Vec<ResultRecord> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| ResultRecord::from_line(l).unwrap())
        .collect()
}

#[test]
fn classify_stabilized() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "stab.cfg", STABILIZED);
    let out = anharmonic(&["--config", &cfg, "classify"]);
    assert_eq!(out.status.code(), Some(0));
    let r = &records(&out)[0];
    assert_eq!(r.command, "classify");
    assert_eq!(r.outputs["verdict"], "stabilized_all_beta");
    let (j_hat, r_m) = (r.outputs["J_hat"].as_f64().unwrap(), r.outputs["R_m"].as_f64().unwrap());
    assert!(j_hat < r_m);
}

#[test]
fn theta_is_reproducible() {
    let a = anharmonic(&["theta", "--d", "3"]);
    let b = anharmonic(&["theta", "--d", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let r = &records(&a)[0];
    assert_eq!(r.config_digest.len(), 16);
    assert!((r.outputs["theta"].as_f64().unwrap() - 1.516386).abs() < 1e-4);
}

#[test]
fn beta_star_outside_hypothesis_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "stab.cfg", STABILIZED);
    let out = anharmonic(&["--config", &cfg, "beta-star"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("4 m upsilon^2 J_hat > theta(d)"));
}

#[test]
fn beta_star_record_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "strong.cfg", STRONG);
    let csv = dir.path().join("beta.csv");
    let out = anharmonic(&["--config", &cfg, "--format", "csv", "--out", csv.to_str().unwrap(), "beta-star"]);
    assert_eq!(out.status.code(), Some(0));
    let table = fs::read_to_string(csv).unwrap();
    assert!(table.starts_with("J_hat,theta,beta_star\n"));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let dup = write(dir.path(), "dup.cfg", &format!("{STABILIZED}m = 2\n"));
    let out = anharmonic(&["--config", &dup, "spectrum"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model.m") && err.contains("line 9") && err.contains("line 2"), "{err}");

    let bad = write(dir.path(), "bad.cfg", &STABILIZED.replace("b1 = 1", "b1 = -1"));
    let out = anharmonic(&["--config", &bad, "spectrum"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("b1 > 0"));

    assert_eq!(anharmonic(&["--config", "/nonexistent/x.cfg", "spectrum"]).status.code(), Some(2));
    assert_eq!(anharmonic(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(anharmonic(&["theta"]).status.code(), Some(2));
    assert_eq!(anharmonic(&["--set", "model.q=1", "theta", "--d", "3"]).status.code(), Some(2));
}

#[test]
fn numerical_errors_exit_3() {
    assert_eq!(anharmonic(&["theta", "--d", "2"]).status.code(), Some(3));
}

#[test]
fn sampling_is_stream_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{STRONG}[lattice]\nextents = 2, 2, 2\nboundary = plus\n[chain]\nsweeps = 300\nburn_in = 20\nchains = 2\n");
    let cfg = write(dir.path(), "mc.cfg", &text);
    let a = anharmonic(&["--config", &cfg, "--seed", "4", "order-parameter"]);
    let b = anharmonic(&["--config", &cfg, "--seed", "4", "--threads", "1", "order-parameter"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let r = &records(&a)[0];
    assert_eq!(r.seed, Some(4));
    assert_eq!(r.outputs["M_hat"]["n_samples"], 600);
    let c = anharmonic(&["--config", &cfg, "--seed", "5", "order-parameter"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn sample_saves_a_readable_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{STRONG}[lattice]\nextents = 2, 2, 2\nboundary = minus\n[chain]\nsweeps = 50\nburn_in = 0\n");
    let cfg = write(dir.path(), "mc.cfg", &text);
    let loops = dir.path().join("final.loops");
    let out = anharmonic(&["--config", &cfg, "sample", "--save", loops.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let bytes = fs::read(loops).unwrap();
    let config = anharmonic::loops::read_configuration(&mut bytes.as_slice()).unwrap();
    assert_eq!(config.volume().sites(), 8);
    assert_eq!(config.boundary().name(), "minus");
}

#[test]
fn gks_audit_reports_both_signs() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{STRONG}[lattice]\nextents = 2, 2, 2\nboundary = plus\nslices = 16\n[chain]\nsweeps = 400\nburn_in = 50\n[run]\nsites = 0, 3, 7\ntimes = 0, 1, 2\nfunctions = clip:3, clip:3, clip:3\n"
    );
    let cfg = write(dir.path(), "gks.cfg", &text);
    let out = anharmonic(&["--config", &cfg, "gks-audit"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = &records(&out)[0];
    assert_eq!(r.outputs["passed"], true);
    assert_eq!(r.outputs["exact_mirror"], true);

    let free = write(dir.path(), "free.cfg", &text.replace("boundary = plus", "boundary = free"));
    assert_eq!(anharmonic(&["--config", &free, "gks-audit"]).status.code(), Some(2));
}

#[test]
fn verify_selected_checks() {
    let out = anharmonic(&["verify", "--criterion", "4", "--criterion", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let rs = records(&out);
    assert_eq!(rs.len(), 2);
    assert!(rs.iter().all(|r| r.outputs["passed"] == true));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[PASS]  4"));
    assert_eq!(anharmonic(&["verify", "--criterion", "42"]).status.code(), Some(2));
}
