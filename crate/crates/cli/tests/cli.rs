use std::fs;
use std::process::{Command, Output};

fn mipsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mipsim"))
        .args(args)
        .env_remove("MIPSIM_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn paths_prints_original_route() {
    let o = mipsim(&[
        "paths",
        "--cn",
        "0.0.0",
        "--coa",
        "1.5.0",
        "--strategy",
        "original",
    ]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o).trim(),
        "0.0.0 1.0.0 1.1.0 1.2.0 1.1.0 1.0.0 1.4.0 1.5.0"
    );
    let o = mipsim(&[
        "paths",
        "--cn",
        "0.0.0",
        "--coa",
        "1.5.0",
        "--strategy",
        "twolevel",
    ]);
    assert_eq!(stdout(&o).trim(), "0.0.0 1.0.0 1.4.0 1.5.0");
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["run", "--scenario", "Z", "--out", "x"][..],
        &[
            "run",
            "--scenario",
            "A",
            "--strategy",
            "threelevel",
            "--out",
            "x",
        ],
        &[
            "paths",
            "--cn",
            "0.0.0",
            "--coa",
            "1.5",
            "--strategy",
            "original",
        ],
        &["verify", "--fast"],
        &["launch"],
    ] {
        let o = mipsim(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn run_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = mipsim(&[
        "run",
        "--scenario",
        "B",
        "--strategy",
        "all",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("scenario B"));
    for f in [
        "delay_B_original.csv",
        "delay_B_onelevel.csv",
        "delay_B_twolevel.csv",
        "loss_B.csv",
        "registration_B.csv",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn single_strategy_run_and_seed_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = mipsim(&[
        "run",
        "--scenario",
        "D",
        "--strategy",
        "twolevel",
        "--seed",
        "42",
        "--out",
        out,
    ]);
    assert!(o.status.success());
    assert!(!dir.path().join("delay_D_original.csv").exists());
    let reg = fs::read_to_string(dir.path().join("registration_D.csv")).unwrap();
    assert_eq!(reg.lines().next().unwrap(), "via_fa,twolevel");
}

#[test]
fn bad_seed_env_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mipsim"))
        .args([
            "run",
            "--scenario",
            "A",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .env("MIPSIM_SEED", "abc")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("MIPSIM_SEED"));
}

#[test]
fn missing_topology_file_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mipsim(&[
        "run",
        "--scenario",
        "A",
        "--topology",
        "/no/such/net.toml",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/no/such/net.toml"));
}

#[test]
fn verify_prints_every_criterion() {
    let o = mipsim(&["verify"]);
    let text = stdout(&o);
    for id in 1..=8 {
        assert!(text.contains(&format!("criterion {id} ")), "{text}");
    }
    // Criterion 5 is red on the reference hierarchy, so verify reports failure.
    assert!(text.contains("[FAIL] criterion 5"));
    assert_eq!(o.status.code(), Some(1));
}
