//! Acceptance checks for the command-line contract: exit codes and the two
//! documented diagnostic failures, exercised against the canned configs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pxhardy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn criterion(n: u32, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {n}: {status} - {detail}");
    assert!(pass, "acceptance criterion {n} failed: {detail}");
}

#[test]
fn criterion_8_discrepancy_diagnostics() {
    // The orthant instance ships with sigma = p + beta - 1, which violates
    // beta > sup sigma; `validate` must exit 2 and name the check with a
    // witness.
    let out = run(&["validate", config("orthant.cfg").to_str().unwrap()]);
    let text = stdout(&out);
    let orthant_ok = out.status.code() == Some(2)
        && text.contains("FAIL  beta_above_sigma")
        && text.contains("witness");
    assert!(orthant_ok, "orthant validate output:\n{text}");

    // The as_printed sign variant of the piecewise profile is negative;
    // `validate` must exit 2 and point at the nonnegativity check.
    let out = run(&[
        "validate",
        config("piecewise_printed.cfg").to_str().unwrap(),
    ]);
    let text = stdout(&out);
    let piecewise_ok = out.status.code() == Some(2)
        && text.contains("FAIL  u_nonnegative")
        && text.contains("witness");
    assert!(piecewise_ok, "piecewise validate output:\n{text}");

    criterion(
        8,
        orthant_ok && piecewise_ok,
        "validate exits 2 with a beta_above_sigma witness on the orthant instance and a u_nonnegative witness on the as_printed piecewise variant",
    );
}

#[test]
fn verify_writes_passing_csv_and_exits_zero() {
    let dir = std::env::temp_dir().join("pxhardy_cli_accept");
    std::fs::create_dir_all(&dir).unwrap();
    let out_path = dir.join("power_linear.csv");
    let out = run(&[
        "verify",
        config("power_linear.cfg").to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(
        rows[0],
        "scenario,family,xi_params,lhs,rhs_gradient,rhs_log,ratio,error_budget,pass"
    );
    let data = &rows[1..];
    assert!(data.len() >= 20, "expected at least 20 rows");
    assert!(data.iter().all(|r| r.ends_with(",true")));
}

#[test]
fn verify_on_orthant_exits_two_without_integrating() {
    let out = run(&["verify", config("orthant.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("failed validation"));
}

#[test]
fn usage_and_parse_errors_exit_one() {
    let out = run(&["validate", "/nonexistent/path.cfg"]);
    assert_eq!(out.status.code(), Some(1));

    let dir = std::env::temp_dir().join("pxhardy_cli_accept");
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.cfg");
    std::fs::write(&bad, "[scenario\nbuiltin = \"power_linear\"\n").unwrap();
    let out = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));

    let out = run(&["validate", config("power_linear.cfg").to_str().unwrap(), "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn laplacian_reports_both_routes() {
    let out = run(&[
        "laplacian",
        config("power_alpha.cfg").to_str().unwrap(),
        "--at",
        "1,0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let radial: f64 = text
        .lines()
        .find(|l| l.starts_with("radial closed form:"))
        .and_then(|l| l.rsplit(' ').next())
        .unwrap()
        .parse()
        .unwrap();
    let fd: f64 = text
        .lines()
        .find(|l| l.starts_with("finite differences"))
        .and_then(|l| l.rsplit(' ').next())
        .unwrap()
        .parse()
        .unwrap();
    // alpha = 2, p = 2, n = 2 at |x| = 1: (alpha-1)(p-1) + n - 1 = 2.
    assert!((radial - 2.0).abs() < 1e-9, "radial {radial}");
    assert!((fd - 2.0).abs() < 1e-4, "finite differences {fd}");
}

#[test]
fn norm_matches_constant_exponent_closed_form() {
    let out = run(&[
        "norm",
        config("power_linear.cfg").to_str().unwrap(),
        "--f",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let value: f64 = stdout(&out).trim().parse().unwrap();
    // (∫_1^3 2^2 dx)^{1/2} = sqrt(8).
    assert!((value - 8f64.sqrt()).abs() < 1e-6, "norm {value}");
}

#[test]
fn custom_config_validates_and_verifies() {
    let out = run(&["validate", config("custom_interval.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let out = run(&["verify", config("custom_interval.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
}

#[test]
fn density_export_has_rows() {
    let dir = std::env::temp_dir().join("pxhardy_cli_accept");
    std::fs::create_dir_all(&dir).unwrap();
    let out_path = dir.join("density.csv");
    let out = run(&[
        "density",
        config("exp.cfg").to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
        "--resolution",
        "9",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert!(csv.starts_with("x1,lhs_density,rhs_density"));
    assert_eq!(csv.lines().count(), 10);
}
