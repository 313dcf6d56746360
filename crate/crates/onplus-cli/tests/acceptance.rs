//! Acceptance suite: one pass/fail line per criterion.
//!
//! Criteria 1-12 run in process against their time budgets. Criterion 13 runs
//! `all --N 3 --seed 42` twice through the binary, requires byte-identical
//! report files and stdout, and requires the binary's verdicts to match the
//! in-process ones.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use onplus_cli::suite::CRITERIA;
use onplus_cli::{run_criteria, RunConfig};

const FULL_SUITE_BUDGET_SECS: f64 = 45.0 * 60.0;

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

struct CliRun {
    code: Option<i32>,
    stdout: Vec<u8>,
    files: BTreeMap<String, Vec<u8>>,
    seconds: f64,
}

fn run_all(out: &Path) -> CliRun {
    let t = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_onplus"))
        .args(["all", "--N", "3", "--seed", "42", "--out"])
        .arg(out)
        .env_remove("ONPLUS_N")
        .output()
        .expect("binary runs");
    CliRun { code: o.status.code(), stdout: o.stdout, files: read_dir(out), seconds: t.elapsed().as_secs_f64() }
}

fn cli_verdicts(files: &BTreeMap<String, Vec<u8>>) -> BTreeMap<usize, bool> {
    let bytes = files.get("summary_criteria.csv").expect("summary written");
    let mut rd = csv::Reader::from_reader(bytes.as_slice());
    rd.records()
        .map(|r| {
            let r = r.unwrap();
            (r[0].parse().unwrap(), &r[2] == "true")
        })
        .collect()
}

#[test]
fn acceptance() {
    let cfg = RunConfig::default();
    let ids: Vec<usize> = (1..=12).collect();
    let outcomes = run_criteria(&cfg, &ids).expect("suite configures");
    let mut lines = Vec::new();
    let mut all_pass = true;
    let mut in_process = BTreeMap::new();
    for o in &outcomes {
        let budget = CRITERIA[o.id - 1].budget_secs as f64;
        let pass = o.pass() && o.seconds <= budget;
        in_process.insert(o.id, o.pass());
        all_pass &= pass;
        let mut detail = match (&o.report, &o.error) {
            (_, Some(e)) => e.to_string(),
            (Some(r), None) => {
                let f: Vec<String> = r.failing().iter().map(|c| format!("{} ({})", c.name, c.detail)).collect();
                if f.is_empty() { "all assertions pass".into() } else { format!("failing: {}", f.join("; ")) }
            }
            (None, None) => String::new(),
        };
        if o.seconds > budget {
            detail.push_str(&format!("; over budget {budget} s"));
        }
        lines.push(format!(
            "criterion {:>2} {} {} [{:.1} s / {budget} s] {detail}",
            o.id,
            if pass { "PASS" } else { "FAIL" },
            o.title,
            o.seconds
        ));
    }

    let dir = tempfile::tempdir().unwrap();
    let first = run_all(&dir.path().join("first"));
    let second = run_all(&dir.path().join("second"));
    let identical = first.files == second.files && first.stdout == second.stdout && !first.files.is_empty();
    let verdicts = cli_verdicts(&first.files);
    let matches = ids.iter().all(|id| verdicts.get(id) == in_process.get(id));
    let rerun_ok = verdicts.get(&13).copied().unwrap_or(false);
    let code_ok = matches!(first.code, Some(0) | Some(1)) && first.code == second.code;
    let slowest = first.seconds.max(second.seconds);
    let pass13 = identical && matches && rerun_ok && code_ok && slowest <= FULL_SUITE_BUDGET_SECS;
    all_pass &= pass13;
    lines.push(format!(
        "criterion 13 {} determinism [{:.1} s / {FULL_SUITE_BUDGET_SECS} s per run] {} files byte-identical: {identical}; \
         binary verdicts match in-process: {matches}; seeded reruns: {rerun_ok}; exit codes {:?}/{:?}",
        if pass13 { "PASS" } else { "FAIL" },
        slowest,
        first.files.len(),
        first.code,
        second.code
    ));

    println!();
    for l in &lines {
        println!("{l}");
    }
    assert!(all_pass, "acceptance criteria failing:\n{}", lines.iter().filter(|l| l.contains(" FAIL ")).cloned().collect::<Vec<_>>().join("\n"));
}
