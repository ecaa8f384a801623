use std::fs;
use std::process::Command;

use gexpect::cli::{parse_args, CliError, Invocation, HEADER};

fn gexpect() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gexpect"))
}

fn read_csv(path: &std::path::Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), HEADER);
    r.records().map(Result::unwrap).collect()
}

#[test]
fn all_scenarios_at_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results.csv");
    let status = gexpect().args(["run", "--scenario", "all", "--out"]).arg(&out).output().unwrap();
    let stdout = String::from_utf8_lossy(&status.stdout);
    assert_eq!(status.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("PASS linear-combination"), "{stdout}");
    let rows = read_csv(&out);
    assert!(rows.len() >= 20, "{} rows", rows.len());
    assert!(rows.iter().all(|r| r[5].is_empty() || &r[5] == "true"));
}

#[test]
fn classical_run_tags_rows_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = gexpect()
            .args(["run", "--scenario", "asymmetric-independence", "--sigma-low-sq", "1", "--sigma-high-sq", "1", "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success());
        fs::read_to_string(out).unwrap()
    };
    let a = run("a.csv");
    assert!(a.contains("[classical-zero]"), "{a}");
    assert_eq!(a, run("b.csv"));
}

#[test]
fn markdown_report_and_refinement_columns() {
    let out = gexpect()
        .args(["run", "--scenario", "asymmetric-independence", "--report", "md", "--refine", "1"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let md = String::from_utf8(out.stdout).unwrap();
    let header = md.lines().next().unwrap();
    assert!(header.starts_with("| scenario | label | value"), "{header}");
    assert!(header.contains("refinement_delta_1"), "{header}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS asymmetric-independence"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# bundle\nscenario = linear-combination\nsigma-high-sq = 9\nalpha = 2\n").unwrap();
    let argv = ["gexpect", "run", "--config", conf.to_str().unwrap(), "--alpha", "3"];
    let Invocation::Run(c) = parse_args(argv).unwrap() else {
        panic!("expected a run");
    };
    assert_eq!(c.scenarios, vec!["linear-combination"]);
    assert_eq!(c.params.sigma_high_sq, 9.0);
    assert_eq!(c.params.alpha, 3.0);

    fs::write(&conf, "scenario = all\nwidth = 3\n").unwrap();
    let argv = ["gexpect", "run", "--config", conf.to_str().unwrap()];
    assert!(matches!(parse_args(argv), Err(CliError::Config { line: 2, .. })));
}

#[test]
fn usage_errors_exit_nonzero() {
    let out = gexpect().args(["run", "--scenario", "bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mean-certainty"));
    let out = gexpect().args(["run", "--h", "abc", "--scenario", "all"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = gexpect().arg("run").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("r.csv");
    let status = gexpect()
        .args(["run", "--scenario", "invertible-scan", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&status.stderr).contains("r.csv"));
}

#[test]
fn list_prints_catalog() {
    let out = gexpect().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), gexpect::scenarios::SCENARIO_NAMES.len());
}
