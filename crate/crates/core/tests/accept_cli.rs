use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::Parser;
use serde_json::Value;
use singular_ivp::cli::{run, Cli};
use tempfile::TempDir;

fn sivp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sivp")).args(args).output().expect("run sivp")
}

fn problem(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn check_exit_codes_follow_verdicts() {
    let dir = TempDir::new().unwrap();
    let txx = problem(&dir, "txx.json", r#"{"f": "t*x", "u": "t", "omega": "r"}"#);
    let peano = problem(&dir, "peano.json", r#"{"f": "-sqrt(abs(x))", "u": "t", "omega": "r"}"#);
    let p = txx.to_str().unwrap();
    let o = sivp(&["check", "--problem", p, "--criteria", "nagumo,constantin,theorem1-reduced"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let json: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["command"], "check");
    assert_eq!(json["reports"].as_array().unwrap().len(), 3);

    let o = sivp(&["check", "--problem", peano.to_str().unwrap(), "--criteria", "nagumo"]);
    assert_eq!(code(&o), 1);
    let json: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(json["reports"][0]["passed"], false);
}

#[test]
fn configuration_errors_exit_2_and_are_listed_together() {
    let dir = TempDir::new().unwrap();
    let bare = problem(&dir, "bare.json", r#"{"f": "t*x"}"#);
    let o = sivp(&["check", "--problem", bare.to_str().unwrap(), "--criteria", "constantin,theorem1", "--rtol", "-1"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("criteria.constantin"), "{err}");
    assert!(err.contains("criteria.theorem1"), "{err}");
    assert!(err.contains("rtol"), "{err}");
    assert!(o.stdout.is_empty());

    let o = sivp(&["check", "--problem", dir.path().join("missing.json").to_str().unwrap(), "--criteria", "nagumo"]);
    assert_eq!(code(&o), 2);
    let o = sivp(&["suite", "--corpus", dir.path().join("nothing").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn out_file_matches_stdout_and_library() {
    let dir = TempDir::new().unwrap();
    let p = problem(&dir, "lin.json", r#"{"f": "x", "u": "sqrt(t)", "omega": "r", "T": 0.25}"#);
    let p = p.to_str().unwrap();
    let out = dir.path().join("report.json");
    let args = ["check", "--problem", p, "--criteria", "athanassov,equivalence"];
    let stdout = sivp(&args);
    let mut with_out = args.to_vec();
    with_out.extend(["--out", out.to_str().unwrap()]);
    let written = sivp(&with_out);
    assert_eq!(code(&stdout), 0);
    assert_eq!(code(&written), 0);
    assert!(written.stdout.is_empty());
    let file = std::fs::read(&out).unwrap();
    assert_eq!(file, stdout.stdout);

    let cli = Cli::try_parse_from(std::iter::once("sivp").chain(args)).unwrap();
    let (outcome, _) = run(&cli).unwrap();
    assert_eq!(outcome.body.as_bytes(), &file[..]);
}

#[test]
fn suite_output_is_byte_identical_across_processes() {
    let c = corpus();
    let args = ["suite", "--corpus", c.to_str().unwrap()];
    let a = sivp(&args);
    let b = sivp(&args);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let json: Value = serde_json::from_slice(&a.stdout).unwrap();
    let report = &json["reports"][0];
    assert_eq!(report["mismatches"], 0);
    assert_eq!(report["alarms"], 0);
    assert_eq!(report["rows"].as_array().unwrap().len(), 9);
}

#[test]
fn solve_and_funnel_write_full_precision_csv() {
    let dir = TempDir::new().unwrap();
    let p = problem(&dir, "lin.json", r#"{"f": "x"}"#);
    let p = p.to_str().unwrap();
    let o = sivp(&["solve", "--problem", p, "--t0", "1", "--x0", "1", "--t1", "2", "--samples", "5"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,local_error"));
    let last: Vec<f64> = lines.last().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(last[0], 2.0);
    assert!((last[1] - (-1.0f64).exp()).abs() < 1e-7, "{last:?}");

    let o = sivp(&["funnel", "--problem", p, "--format", "csv", "--n", "11"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert!(text.starts_with("x_T,x_floor,reaches_zero\n"));
}

#[test]
fn degenerate_generalized_form_exits_1() {
    let dir = TempDir::new().unwrap();
    let p = problem(&dir, "u.json", r#"{"f": "t*x", "u": "t"}"#);
    let o = sivp(&["reparam", "--problem", p.to_str().unwrap(), "--c", "1"]);
    assert_eq!(code(&o), 1);
    let json: Value = serde_json::from_slice(&o.stdout).unwrap();
    let g = &json["reports"][0]["generalized"];
    assert!(g["error"].as_str().unwrap().contains("c > e"), "{g}");
    let tau_plus = g["stated_tau_plus"].as_f64().unwrap();
    assert!((tau_plus * tau_plus.exp() - 1.0).abs() < 1e-10);
}
