use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use spectra_core::geometry::make_rectangle;

fn spectra(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectra")).args(args).env_remove("SPECTRA_SEED").output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_plan(dir: &Path, body: &str) -> std::path::PathBuf {
    let p = dir.join("plan.json");
    std::fs::write(&p, body).unwrap();
    p
}

const DUMBBELL_PLAN: &str = r#"{"class": "dumbbell", "sampler": "random", "count": 10, "seed": 42, "arc_segments": 64}"#;

#[test]
fn solve_unit_square() {
    let dir = tempfile::tempdir().unwrap();
    let domain = dir.path().join("square.json");
    make_rectangle(1.0).unwrap().save(&domain).unwrap();
    let out = spectra(&["solve", "--domain", path(&domain)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let l1 = v["eigenvalues"][0].as_f64().unwrap();
    let two_pi2 = 2.0 * std::f64::consts::PI.powi(2);
    assert!((l1 - two_pi2).abs() / two_pi2 <= 0.003, "λ1 = {l1}");
    assert!((v["x"].as_f64().unwrap() - 2.5).abs() <= 0.01);
    assert!((v["y"].as_f64().unwrap() - 2.5).abs() <= 0.01);
    assert_eq!(v["meta"]["subcommand"], "solve");
    assert!(v["meta"]["tool"].as_str().unwrap().starts_with("spectra "));
    assert!(v["meta"]["config"]["options"]["levels"].is_number());
}

#[test]
fn bounds_table() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("bounds.csv");
    let out = spectra(&["bounds", "--step", "0.01", "--out", path(&out_path)]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("# tool: spectra "));
    assert!(text.contains("# subcommand: bounds"));
    assert!(!text.contains('\r'));
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let head = r.headers().unwrap().clone();
    let ie = head.iter().position(|h| h == "envelope").unwrap();
    let max = r.records().map(|rec| rec.unwrap()[ie].parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!((max - 3.831).abs() < 2e-3, "envelope maximum {max}");
}

#[test]
fn scan_is_reproducible_and_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(dir.path(), DUMBBELL_PLAN);
    let run = |name: &str, jobs: &str| {
        let out_dir = dir.path().join(name);
        let out = spectra(&["scan", "--plan", path(&plan), "--out", path(&out_dir), "--jobs", jobs]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        ["results.csv", "bins.csv", "summary.csv", "skipped.csv"].map(|f| std::fs::read(out_dir.join(f)).unwrap())
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "1"));
    assert_eq!(a, run("c", "2"));
    let results = String::from_utf8(a[0].clone()).unwrap();
    assert!(results.contains("# seed: 42"));
    assert!(results.contains("# config: {"));
    assert_eq!(results.lines().filter(|l| !l.starts_with('#')).count(), 11);
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let plan = write_plan(dir.path(), &DUMBBELL_PLAN.replace("\"count\": 10", "\"count\": 2"));
    let seed_of = |flag: Option<&str>, env: Option<&str>, name: &str| {
        let out_dir = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_spectra"));
        cmd.args(["scan", "--plan", path(&plan), "--out", path(&out_dir)]).env_remove("SPECTRA_SEED");
        if let Some(s) = flag {
            cmd.args(["--seed", s]);
        }
        if let Some(s) = env {
            cmd.env("SPECTRA_SEED", s);
        }
        assert!(cmd.output().unwrap().status.success());
        let text = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
        text.lines().find_map(|l| l.strip_prefix("# seed: ")).unwrap().to_string()
    };
    assert_eq!(seed_of(None, None, "plan"), "42");
    assert_eq!(seed_of(None, Some("7"), "env"), "7");
    assert_eq!(seed_of(Some("9"), Some("7"), "flag"), "9");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(spectra(&["solve"]).status.code(), Some(1));
    assert_eq!(spectra(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(spectra(&["--help"]).status.code(), Some(0));

    let missing = dir.path().join("missing.json");
    assert_eq!(spectra(&["solve", "--domain", path(&missing)]).status.code(), Some(2));
    let bad_plan = write_plan(dir.path(), r#"{"class": "dumbbell", "sampler": "random", "colour": 3}"#);
    let out = spectra(&["scan", "--plan", path(&bad_plan), "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(spectra(&["bounds", "--step=0", "--out", path(&dir.path().join("b.csv"))]).status.code(), Some(2));

    let tri = dir.path().join("tri.json");
    std::fs::write(&tri, r#"{"class": "custom", "outer": [[0, 0], [1, 0], [0, 1]]}"#).unwrap();
    let out = spectra(&["solve", "--domain", path(&tri), "--refine", "0", "--h", "5"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("numerical failure in solve"));
}

#[test]
fn rect_check_reports_the_slope() {
    let out = spectra(&["perturb", "rect-check", "--c0", "0", "--c1", "0", "--c2", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["slope"].as_f64().unwrap() - 1.37419).abs() < 1e-5);
    assert_eq!(v["conditions_hold"], true);
    assert_eq!(v["pass"], true);
    assert!(v["fem"].is_null());

    let out = spectra(&["perturb", "rect-check", "--c0", "-0.5", "--c1", "0.2", "--c2", "1"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let expect = 96.0 * 3f64.sqrt() / 121.0 * (1.0 + 0.5 * 2f64.sqrt());
    assert!((v["slope"].as_f64().unwrap() - expect).abs() < 1e-9);
}

#[test]
fn plot_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.csv");
    std::fs::write(&results, "# tool: test\nid,x,y\n0,1.5,3.0\n1,1.8181818,3.1818181\n2,9.0,9.0\n").unwrap();
    let render = |name: &str| {
        let out_path = dir.path().join(name);
        let out = spectra(&["plot", "--results", path(&results), "--out", path(&out_path)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(out_path).unwrap()
    };
    let svg = render("a.svg");
    assert_eq!(svg, render("b.svg"));
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("subcommand: plot"));
    assert_eq!(svg.matches("<circle").count(), 2, "the out-of-range point is clipped");
}
