use std::path::Path;
use std::process::{Command, Output};

use blowup_harness::config::{parse_config, ConfigError, DEFAULT_CONFIG};
use blowup_harness::ledger::LEDGER_FILE;

fn lab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blowup-lab"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

#[test]
fn validate_on_defaults_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["validate", "--strict", "--output-dir", "v"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        out.status.success(),
        "{stdout}\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(!stdout.contains("FAIL"));
    let table = std::fs::read_to_string(dir.path().join("v/validate.csv")).unwrap();
    assert!(table.starts_with("suite,passed,detail\n"));
    assert!(
        table.lines().skip(1).all(|l| l.split(',').nth(1) == Some("true")),
        "{table}"
    );
}

#[test]
fn bounds_rows_and_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let out = lab(&["bounds", "--strict", "--output-dir", "b"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("b/bounds.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    let summary = std::fs::read_to_string(dir.path().join("b/bounds_summary.csv")).unwrap();
    assert!(
        summary.contains("lower_violations,0\n") && summary.contains("upper_violations,0\n"),
        "{summary}"
    );
    let ledger = std::fs::read_to_string(dir.path().join("b").join(LEDGER_FILE)).unwrap();
    let entry: serde_json::Value = serde_json::from_str(ledger.lines().last().unwrap()).unwrap();
    assert_eq!(entry["replicate_seeds"].as_array().unwrap().len(), 100);
    assert_eq!(entry["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn seed_override_and_horizon_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "ensemble_size = 5\n");
    let run = |extra: &[&str], sub: &str| {
        let mut args = vec!["bounds", "--config", &cfg, "--output-dir", sub];
        args.extend_from_slice(extra);
        assert!(lab(&args, dir.path()).status.success());
        std::fs::read(dir.path().join(sub).join("bounds.csv")).unwrap()
    };
    let base = run(&[], "a");
    assert_eq!(base, run(&["--jobs", "1"], "a2"));
    assert_ne!(base, run(&["--seed-override", "7"], "s"));
    let longer = String::from_utf8(run(&["--horizon", "0.3"], "h")).unwrap();
    assert_eq!(longer.lines().count(), 6);
}

#[test]
fn corrupted_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "k = 1.0\nq = = 2\n");
    let out = lab(&["validate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn constraint_violations_all_listed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "p = 0.5\nm = -1.0\nsampling = \"magic\"\n");
    let out = lab(&["bounds", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("p,q,n>1") && err.contains("m ≥ 0") && err.contains("sampling"),
        "{err}"
    );
}

#[test]
fn unknown_key_is_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "ensemble_size = 2\nfuture_knob = 3\n");
    let out = lab(&["simulate", "--config", &cfg, "--output-dir", "s"], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key `future_knob`"));
    let table = std::fs::read_to_string(dir.path().join("s/simulate.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(dir.path().join("s/traces/trace_0001.csv").exists());
}

#[test]
fn probability_needs_an_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "ensemble_size = 5\n");
    assert_eq!(
        lab(&["probability", "--config", &cfg], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn probability_report_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "ensemble_size = 40\nhurst = 0.5\n");
    let out = lab(&["probability", "--config", &cfg, "--output-dir", "p"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("p/probability.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("bound_name,analytic_value,mc_estimate,ci_low,ci_high,verdict,variant_flags"));
    let names: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert!(names.contains(&"gamma_law_case1") && names.contains(&"density_upper_bound"));
}

#[test]
fn shipped_default_parses_cleanly() {
    let loaded = parse_config(DEFAULT_CONFIG).unwrap();
    assert!(loaded.warnings.is_empty());
    assert!(matches!(
        parse_config("ensemble_size = -3\n"),
        Err(ConfigError::Invalid(_))
    ));
}
