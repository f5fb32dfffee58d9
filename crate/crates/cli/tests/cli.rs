//! End-to-end checks of config loading, the run dispatcher, and the binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nlcontact_cli::config::{load_config, parse_config, to_config_text, validate, Mode};
use nlcontact_cli::runner::run_command;
use nlcontact_core::field::FieldRef;
use nlcontact_core::verify::builtin_example;

const EXAMPLE_CFG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/example_sec4.cfg");
const CROSS_CFG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/cross_validate.cfg");

fn nlcontact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlcontact"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Semantic field equality at a grid of sample points.
fn assert_same_field(name: &str, lhs: &FieldRef, rhs: &FieldRef) {
    for &x1 in &[0.0, 0.3, 0.5, 0.72, 1.0] {
        for &x2 in &[0.0, 0.21, 0.5, 0.88, 1.0] {
            let a = lhs.eval(x1, x2).unwrap();
            let b = rhs.eval(x1, x2).unwrap();
            assert!(
                (a - b).abs() <= 1e-12 * (1.0 + b.abs()),
                "{name} differs at ({x1}, {x2}): {a} vs {b}"
            );
        }
    }
}

fn trace_deltas(iterations_csv: &str) -> Vec<f64> {
    iterations_csv
        .lines()
        .skip(1)
        .map(|line| line.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

fn solution_rows(solution_csv: &str) -> Vec<(f64, f64, f64)> {
    solution_csv
        .lines()
        .skip(1)
        .map(|line| {
            let mut cells = line.split(',');
            let x1 = cells.next().unwrap().parse().unwrap();
            let x2 = cells.next().unwrap().parse().unwrap();
            let u = cells.next().unwrap().parse().unwrap();
            (x1, x2, u)
        })
        .collect()
}

#[test]
fn shipped_example_matches_builtin() {
    let cfg = load_config(EXAMPLE_CFG).unwrap();
    assert_eq!(cfg.mode, Mode::Verify);
    assert_eq!(cfg.numerics.n1, 127);
    assert_eq!(cfg.numerics.n2, 127);
    assert_eq!(cfg.numerics.trace_tol, 1e-13);
    assert_eq!(cfg.numerics.max_iters, 30);

    let (reference, exact) = builtin_example();
    let problem = cfg.problem().unwrap();
    assert_eq!(problem.geometry.rect.a, reference.geometry.rect.a);
    assert_eq!(problem.geometry.rect.b, reference.geometry.rect.b);
    assert_eq!(problem.geometry.xi0, reference.geometry.xi0);
    assert_eq!(problem.geometry.xi_minus, reference.geometry.xi_minus);
    assert_eq!(problem.geometry.xi_plus, reference.geometry.xi_plus);
    assert_eq!(problem.contact.beta_minus, reference.contact.beta_minus);
    assert_eq!(problem.contact.beta_plus, reference.contact.beta_plus);
    assert_same_field("phi0", &problem.contact.phi0, &reference.contact.phi0);

    let pairs = [
        (&problem.data.minus, &reference.data.minus, "minus"),
        (&problem.data.plus, &reference.data.plus, "plus"),
    ];
    for (got, want, side) in pairs {
        assert_same_field(&format!("{side} K11"), &got.k11, &want.k11);
        assert_same_field(&format!("{side} K12"), &got.k12, &want.k12);
        assert_same_field(&format!("{side} K21"), &got.k21, &want.k21);
        assert_same_field(&format!("{side} K22"), &got.k22, &want.k22);
        assert_same_field(&format!("{side} reaction"), &got.reaction, &want.reaction);
        assert_same_field(&format!("{side} source"), &got.source, &want.source);
        assert_same_field(&format!("{side} boundary"), &got.boundary, &want.boundary);
    }

    let declared = cfg.exact_solution().unwrap().expect("example declares [exact]");
    assert_same_field("u_minus", &declared.u_minus, &exact.u_minus);
    assert_same_field("u_plus", &declared.u_plus, &exact.u_plus);
    assert_same_field("u_gamma0", &declared.u_gamma0, &exact.u_gamma0);
}

#[test]
fn shipped_configs_echo_round_trip() {
    for path in [EXAMPLE_CFG, CROSS_CFG] {
        let cfg = load_config(path).unwrap();
        let echoed = parse_config(&to_config_text(&cfg)).unwrap();
        assert_eq!(echoed, cfg, "echo of {path} drifts");
    }
}

#[test]
fn csv_artifacts_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = load_config(EXAMPLE_CFG).unwrap();
    cfg.numerics.n1 = 15;
    cfg.numerics.n2 = 15;

    let mut runs = Vec::new();
    for sub in ["a", "b"] {
        cfg.out_dir = dir.path().join(sub).display().to_string();
        validate(&cfg).unwrap();
        run_command(&cfg).unwrap();
        let read = |file| fs::read(dir.path().join(sub).join(file)).unwrap();
        runs.push((read("iterations.csv"), read("solution.csv")));
    }
    assert_eq!(runs[0].0, runs[1].0, "iterations.csv differs between runs");
    assert_eq!(runs[0].1, runs[1].1, "solution.csv differs between runs");
}

#[test]
fn verify_mode_reports_contraction_and_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = load_config(EXAMPLE_CFG).unwrap();
    cfg.numerics.n1 = 31;
    cfg.numerics.n2 = 31;
    cfg.numerics.max_iters = 40;
    cfg.out_dir = dir.path().display().to_string();
    validate(&cfg).unwrap();

    let report = run_command(&cfg).unwrap();
    assert!(report.iterations >= 5);
    assert_eq!(report.q_bound, 0.625);
    let rel = report.final_rel_error.expect("verify mode tracks errors");
    assert!(rel < 1e-3, "relative error {rel} exceeds the discretization budget");

    let deltas = trace_deltas(&fs::read_to_string(dir.path().join("iterations.csv")).unwrap());
    assert_eq!(deltas.len(), report.iterations);
    for k in 1..deltas.len() {
        if deltas[k] > 1e-11 {
            let quotient = deltas[k] / deltas[k - 1];
            assert!(quotient <= 0.625, "sweep {} contracted by only {quotient}", k + 1);
        }
    }

    let rows = solution_rows(&fs::read_to_string(dir.path().join("solution.csv")).unwrap());
    assert_eq!(rows.len(), 33 * 33);
    let (_, _, center) = rows
        .iter()
        .find(|(x1, x2, _)| *x1 == 0.5 && *x2 == 0.5)
        .expect("grid contains the midpoint");
    let expected = 2f64.sqrt() / 8.0;
    assert!(
        (center - expected).abs() < 5e-4,
        "u(1/2, 1/2) = {center}, expected about {expected}"
    );

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    for key in [
        "mode",
        "config_echo",
        "iterations",
        "q_hat",
        "q_bound",
        "final_abs_error",
        "final_rel_error",
        "warnings",
        "timings",
    ] {
        assert!(json.get(key).is_some(), "report.json lacks `{key}`");
    }
    assert_eq!(json["mode"], "verify");
    assert!(json["final_rel_error"].as_f64().unwrap() < 1e-3);
}

#[test]
fn fourier_mode_with_zero_data_emits_zero_solution() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        r#"
[run]
mode = fourier
output = {}

[geometry]
xi0 = 0.5
xi_minus = 0.25
xi_plus = 0.75

[contact]
beta_minus = 0.25
beta_plus = 0.25
phi0 = "0"

[numerics]
n1 = 15
n2 = 15
modes = 32
"#,
        dir.path().display()
    );
    let cfg = parse_config(&text).unwrap();
    validate(&cfg).unwrap();
    let report = run_command(&cfg).unwrap();
    assert_eq!(report.iterations, 0);

    let iterations = fs::read_to_string(dir.path().join("iterations.csv")).unwrap();
    assert_eq!(iterations, "k,trace_delta,abs_error,rel_error\n");

    let rows = solution_rows(&fs::read_to_string(dir.path().join("solution.csv")).unwrap());
    assert_eq!(rows.len(), 17 * 17);
    for (x1, x2, u) in rows {
        assert_eq!(u, 0.0, "nonzero value {u} at ({x1}, {x2})");
    }
}

#[test]
fn cross_validate_paths_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = load_config(CROSS_CFG).unwrap();
    cfg.numerics.n1 = 31;
    cfg.numerics.n2 = 31;
    cfg.numerics.modes = 32;
    cfg.out_dir = dir.path().display().to_string();
    validate(&cfg).unwrap();

    let report = run_command(&cfg).unwrap();
    let gap = report.final_abs_error.expect("cross-validate reports the gap");
    assert!(gap < 3e-3, "series and sweeps disagree by {gap}");
    assert!(report.iterations > 1);
    assert!(dir.path().join("solution.csv").exists());
}

#[test]
fn binary_rejects_bad_configs_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();

    let overweight = write_config(
        dir.path(),
        r#"
[run]
mode = iterate

[geometry]
xi0 = 0.5
xi_minus = 0.25
xi_plus = 0.75

[contact]
beta_minus = 0.7
beta_plus = 0.5
phi0 = "sin(pi*x2)"
"#,
    );
    let out = nlcontact(&[overweight.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).contains("weight sum"),
        "stderr does not name the violated constraint: {}",
        stderr_of(&out)
    );

    let no_contact = write_config(
        dir.path(),
        r#"
[run]
mode = iterate

[geometry]
xi0 = 0.5
xi_minus = 0.25
xi_plus = 0.75
"#,
    );
    let out = nlcontact(&[no_contact.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).contains("missing section [contact]"),
        "stderr does not name the missing section: {}",
        stderr_of(&out)
    );

    let out = nlcontact(&[dir.path().join("no-such-file.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn binary_runs_and_honors_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[run]
mode = iterate

[geometry]
xi0 = 0.5
xi_minus = 0.25
xi_plus = 0.75

[contact]
beta_minus = 0.25
beta_plus = 0.25
phi0 = "sin(pi*x2)"

[numerics]
n1 = 15
n2 = 15
"#,
    );

    let out_dir = dir.path().join("run-out");
    let out = nlcontact(&[
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("iterations"), "unexpected stdout: {stdout}");
    for file in ["report.json", "iterations.csv", "solution.csv"] {
        assert!(out_dir.join(file).exists(), "{file} missing");
    }

    // --grid replaces both interior counts; 3 interior nodes and the two
    // boundary columns give a 5 x 5 point cloud in solution.csv.
    let small_out = dir.path().join("small-out");
    let out = nlcontact(&[
        cfg.to_str().unwrap(),
        "--grid",
        "3",
        "--out-dir",
        small_out.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let solution = fs::read_to_string(small_out.join("solution.csv")).unwrap();
    assert_eq!(solution.lines().count(), 26);
}
