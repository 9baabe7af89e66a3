use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn nonkahler(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nonkahler"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("valid json on stdout")
}

#[test]
fn verify_reports_the_stencil_floor_and_passes_when_it_is_relaxed() {
    let o = nonkahler(&["verify", "--samples", "20"]);
    assert_eq!(code(&o), 1);
    let r = json(&o);
    assert_eq!(r["schema"], 1);
    assert_eq!(r["pass"], false);
    let failing: Vec<&str> = r["suites"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|s| s["checks"].as_array().unwrap())
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failing, ["phi_cr_residual"]);

    let o = nonkahler(&["verify", "--samples", "20", "--tol", "cr=1e-3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["pass"], true);
}

#[test]
fn verify_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        nonkahler(&["verify", "--samples", "30", "--seed", "5", "--out", p.to_str().unwrap()]);
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn verify_csv_lists_every_check() {
    let o = nonkahler(&["verify", "--samples", "10", "--format", "csv"]);
    let s = stdout(&o);
    assert!(s.starts_with("suite,name,samples,max_deviation,tolerance,pass,seed\n"));
    assert!(s.lines().any(|l| l.starts_with("gluing,glue_round_trip,10,")));
}

#[test]
fn invalid_configuration_exits_with_two() {
    assert_eq!(code(&nonkahler(&["verify", "--rho1", "0.6", "--rho2", "2"])), 2);
    assert_eq!(code(&nonkahler(&["verify", "--tol", "cr=0"])), 2);
    assert_eq!(code(&nonkahler(&["verify", "--tol", "nonsense=1"])), 2);
    assert_eq!(code(&nonkahler(&["verify", "--samples", "0"])), 2);
    assert_eq!(code(&nonkahler(&["frobnicate"])), 2);
    assert_eq!(code(&nonkahler(&["verify", "--config", "/nonexistent/run.cfg"])), 2);
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\nrho1 = 0.25\nrho2 = 1.5\nseed = 3\nsamples.sphere = 10\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let r = json(&nonkahler(&["verify", "--config", cfg, "--samples", "10", "--seed", "4"]));
    assert_eq!(r["params"]["rho1"], 0.25);
    assert_eq!(r["params"]["rho2"], 1.5);
    assert_eq!(r["seed"], 4);

    std::fs::write(dir.path().join("bad.cfg"), "rho1 0.25\n").unwrap();
    let bad = dir.path().join("bad.cfg");
    assert_eq!(code(&nonkahler(&["verify", "--config", bad.to_str().unwrap()])), 2);
}

fn sphere_image(row: &str) -> [f64; 3] {
    let v: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
    let (a, b) = (v[0] * v[0] + v[1] * v[1], v[2] * v[2] + v[3] * v[3]);
    let x = v[4];
    // 4 z1 conj(z2) (a - b - i x sqrt(2 - x^2))
    let (pr, pi) = (v[0] * v[2] + v[1] * v[3], v[1] * v[2] - v[0] * v[3]);
    let (qr, qi) = (a - b, -x * (2.0 - x * x).sqrt());
    [4.0 * (pr * qr - pi * qi), 4.0 * (pr * qi + pi * qr), 8.0 * a * b - 1.0]
}

#[test]
fn fiber_over_the_north_pole() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fiber.csv");
    let o = nonkahler(&["fiber", "--target", "0,0,1", "--samples", "10000", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("re_z1,im_z1,re_z2,im_z2,x"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 10_000);
    for r in rows {
        let [re, im, h] = sphere_image(r);
        let d = (re * re + im * im + (h - 1.0) * (h - 1.0)).sqrt();
        assert!(d < 1e-9, "{r}: {d}");
    }
}

#[test]
fn empty_fiber_request_writes_the_header_only() {
    let o = nonkahler(&["fiber", "--target", "0,0,1", "--samples", "0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "re_z1,im_z1,re_z2,im_z2,x\n");
}

#[test]
fn atlas_fibers_are_tagged_by_type() {
    let o = nonkahler(&["fiber", "--base", "0.15,0", "--samples", "25"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.starts_with("class,chart,base_re,base_im,a_re,a_im,b_re,b_im\n"));
    assert_eq!(s.lines().skip(1).filter(|l| l.starts_with("torus,")).count(), 25);

    let s = stdout(&nonkahler(&["fiber", "--base", "0,0", "--samples", "3"]));
    assert!(s.lines().skip(1).all(|l| l.starts_with("nodal_sphere,weierstrass,")));
    let s = stdout(&nonkahler(&["fiber", "--base", "0,0", "--chart", "d2", "--samples", "3"]));
    assert!(s.lines().skip(1).all(|l| l.starts_with("annulus,product,")));
    assert_eq!(code(&nonkahler(&["fiber", "--samples", "3"])), 2);
    assert_eq!(code(&nonkahler(&["fiber", "--target", "0.5,0,0.5"])), 2);
}

#[test]
fn jscan_rows() {
    let o = nonkahler(&["jscan", "--samples", "40"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.starts_with("tau_re,tau_im,j_re,j_im\n"));
    assert_eq!(s.lines().count(), 41);
    let t = stdout(&nonkahler(&["jscan", "--samples", "40", "--model", "torus"]));
    for (a, b) in s.lines().zip(t.lines()).skip(1) {
        let a: Vec<f64> = a.split(',').map(|x| x.parse().unwrap()).collect();
        let b: Vec<f64> = b.split(',').map(|x| x.parse().unwrap()).collect();
        let (dr, di) = (a[2] - b[2], a[3] - b[3]);
        assert!((dr * dr + di * di).sqrt() < 1e-6 * (1.0 + a[2].hypot(a[3])));
    }
    assert_eq!(code(&nonkahler(&["jscan", "--radius", "0.9"])), 2);
}

#[test]
fn monodromy_windings() {
    for (turns, expect) in [("1", 1), ("-1", -1), ("2", 2)] {
        let o = nonkahler(&["monodromy", "--turns", turns]);
        assert_eq!(code(&o), 0);
        let r = json(&o);
        assert_eq!(r["winding"], expect);
        assert_eq!(r["consistent"], true);
    }
    let o = nonkahler(&["monodromy", "--format", "csv", "--steps", "64"]);
    let s = stdout(&o);
    assert!(s.starts_with("theta,re_z,im_z,branch\n"));
    assert_eq!(s.lines().count(), 66);
    assert_eq!(code(&nonkahler(&["monodromy", "--steps", "16"])), 2);
}

#[test]
fn distinguish_examples() {
    let r = json(&nonkahler(&["distinguish", "--rho0", "0.1", "--other", "0.05,0.3,2.0"]));
    assert_eq!(r["result"]["verdict"], "equivalent");

    let r = json(&nonkahler(&["distinguish", "--rho2", "1.2", "--other", "0.1,0.3,1.3"]));
    assert_eq!(r["result"]["verdict"], "distinct");
    assert_eq!(r["result"]["certificates"][0]["kind"], "annulus_modulus");

    let o = nonkahler(&["distinguish", "--rho1", "0.2", "--other", "0.1,0.3,2.0"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["result"]["certificates"][0]["kind"], "torus_family");
    assert_eq!(r["result"]["certificates"][0]["certified"], true);
}

#[test]
fn unwritable_output_is_an_error() {
    let o = nonkahler(&["jscan", "--samples", "2", "--out", "/nonexistent/dir/j.csv"]);
    assert_eq!(code(&o), 2);
    assert!(!Path::new("/nonexistent/dir/j.csv").exists());
}
