use std::path::Path;
use std::process::{Command, Output};

use onplus_cli::report::{serialize_report, Format};
use onplus_cli::{execute, Cli, RunConfig};
use clap::Parser;

fn onplus(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onplus"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("ONPLUS_N")
        .env_remove("ONPLUS_TOL")
        .output()
        .unwrap()
}

#[test]
fn dims_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = onplus(&["dims", "--N", "3", "--max", "8"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("dims_dims.csv")).unwrap();
    let pairs: Vec<(u32, u64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(pairs, [(0, 1), (1, 3), (2, 8), (3, 21), (4, 55), (5, 144), (6, 377), (7, 987), (8, 2584)]);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(onplus(&["all", "--N", "2"], dir.path()).status.code(), Some(2));
    assert_eq!(onplus(&["dims", "--tol", "1e-3"], dir.path()).status.code(), Some(2));
    assert_eq!(onplus(&["dims", "--tol", "0"], dir.path()).status.code(), Some(2));
    assert_eq!(onplus(&["no-such-command"], dir.path()).status.code(), Some(2));
    assert_eq!(onplus(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn environment_override_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_onplus"))
            .args(args)
            .arg("--out")
            .arg(dir.path())
            .env("ONPLUS_N", "2")
            .output()
            .unwrap()
            .status
            .code()
    };
    assert_eq!(run(&["dims", "--max", "2"]), Some(2));
    assert_eq!(run(&["dims", "--max", "2", "--N", "4"]), Some(0));
}

#[test]
fn cap_exhaustion_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = onplus(&["partial-trace", "--backend", "tensor", "--tensor-cap", "200"], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn json_report_fields_and_verdict_match_programmatic_run() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["projection-defect", "--max", "4", "--format", "json"];
    let o = onplus(&args, dir.path());
    let bytes = std::fs::read(dir.path().join("projection-defect.json")).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    for field in ["config", "grid", "values", "fitted_rate", "empirical_constant", "residuals", "pass"] {
        assert!(v.get(field).is_some(), "missing {field}");
    }
    let pass = v["pass"].as_bool().unwrap();
    assert_eq!(o.status.code(), Some(if pass { 0 } else { 1 }));

    let mut full = vec!["onplus"];
    full.extend(args);
    let cli = Cli::try_parse_from(full).unwrap();
    let cfg = RunConfig::from_args(&cli.global);
    let r = execute(&cli.command, &cfg).unwrap();
    assert_eq!(r.pass(), pass);
    assert_eq!(serialize_report(&r, Format::Json).unwrap()[0].1, bytes);
}

#[test]
fn failing_suite_names_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let o = onplus(&["partial-trace", "--b-max", "4"], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    let stderr = String::from_utf8_lossy(&o.stderr);
    let failing = stdout.contains("[FAIL]");
    assert_eq!(o.status.code(), Some(if failing { 1 } else { 0 }));
    if failing {
        assert!(stderr.contains("failing invariant: partial-trace decay rate"), "{stderr}");
    }
    assert!(dir.path().join("partial-trace_partial_trace.csv").exists());
}

#[test]
fn key_estimate_reports_rate_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["key-estimate", "--N", "3", "--n", "1", "--k", "1", "--l-max", "6", "--format", "json"];
    let a = onplus(&args, &dir.path().join("a"));
    let b = onplus(&args, &dir.path().join("b"));
    let fa = std::fs::read(dir.path().join("a/key-estimate.json")).unwrap();
    let fb = std::fs::read(dir.path().join("b/key-estimate.json")).unwrap();
    assert_eq!(fa, fb);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&fa).unwrap();
    let rate = v["fitted_rate"].as_f64().unwrap();
    assert!(rate < 0.0, "S(l,l) must decay, fitted {rate}");
    let paths = v["checks"].as_array().unwrap().iter().filter(|c| c["name"].as_str().unwrap().starts_with("paths agree"));
    assert!(paths.clone().count() == 6 && paths.into_iter().all(|c| c["pass"] == true));
}

#[test]
fn cross_check_backend_compares_invariant_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = onplus(&["alpha", "--backend", "cross-check", "--max", "5", "--max-11", "5"], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("[PASS] tensor vs coupled: alpha"), "{stdout}");
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn csv_schema_headers() {
    let dir = tempfile::tempdir().unwrap();
    onplus(&["mixing-sum", "--l-max", "3", "--random", "1"], dir.path());
    let head = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(head("mixing-sum_mixing.csv"), "label,n,k,L,increment,partial_sum");
    assert_eq!(head("mixing-sum_summary.csv"), "label,n,k,ratio,plateau_gap");
    assert_eq!(head("mixing-sum_checks.csv"), "name,pass,detail");
}
