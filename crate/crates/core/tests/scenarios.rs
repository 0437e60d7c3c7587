use std::fs;

use mipsim::agents::Strategy;
use mipsim::harness::{
    emit_plotdata, improvement, run_scenario, HarnessError, ScenarioConfig, ScenarioId,
};
use proptest::prelude::*;

fn report(id: ScenarioId) -> mipsim::harness::MetricsReport {
    run_scenario(&ScenarioConfig::builtin(id).unwrap()).unwrap()
}

#[test]
fn scenario_b_registration_round_trips() {
    let r = report(ScenarioId::B);
    let hops: Vec<usize> = r
        .strategies
        .iter()
        .map(|m| m.registration_rtt_hops)
        .collect();
    assert_eq!(hops, [8, 6, 4]);
    for m in &r.strategies {
        assert!(m.conserves(), "{:?}", m.strategy);
    }
}

#[test]
fn scenario_a_interception_paths_coincide() {
    let r = report(ScenarioId::A);
    let one = r.get(Strategy::OneLevelUp).unwrap();
    let two = r.get(Strategy::TwoLevelUp).unwrap();
    assert_eq!(one.data_hops(), two.data_hops());
}

#[test]
fn scenario_e_stops_tunneling_after_return() {
    let r = report(ScenarioId::E);
    for m in &r.strategies {
        assert_eq!(m.tunneled_after_registration, 0, "{:?}", m.strategy);
        assert!(m.registration.as_ref().unwrap().deregistration);
    }
}

#[test]
fn improvement_examples() {
    let x = improvement(0.808378, 0.406199).unwrap();
    assert!((x - 49.75135395).abs() < 1e-8, "{x}");
    let y = improvement(0.606031, 0.406199).unwrap();
    assert!((y - 32.97389077).abs() < 1e-8, "{y}");
    assert!(matches!(
        improvement(0.0, 0.4),
        Err(HarnessError::Domain(_))
    ));
}

proptest! {
    #[test]
    fn improvement_sign_follows_difference(a in 1e-6f64..100.0, b in 0.0f64..100.0) {
        let v = improvement(a, b).unwrap();
        prop_assert_eq!(improvement(a, a).unwrap(), 0.0);
        if a > b { prop_assert!(v > 0.0) } else if a < b { prop_assert!(v < 0.0) } else { prop_assert_eq!(v, 0.0) }
    }
}

#[test]
fn plot_files_follow_naming_contract() {
    let dir = tempfile::tempdir().unwrap();
    let r = report(ScenarioId::B);
    let written = emit_plotdata(&r, dir.path()).unwrap();
    let names: Vec<String> = written
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    for want in [
        "delay_B_original.csv",
        "delay_B_onelevel.csv",
        "delay_B_twolevel.csv",
        "loss_B.csv",
        "registration_B.csv",
    ] {
        assert!(
            names.iter().any(|n| n == want),
            "{want} missing from {names:?}"
        );
    }
    let reg = fs::read_to_string(dir.path().join("registration_B.csv")).unwrap();
    let mut lines = reg.lines();
    assert_eq!(
        lines.next().unwrap(),
        "via_fa,original,onelevel,twolevel,improvement_vs_original,improvement_vs_onelevel"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "1.5.0");
    assert!(
        row[1..]
            .iter()
            .all(|v| v.split('.').nth(1).map(str::len) == Some(6)),
        "{row:?}"
    );

    let loss = fs::read_to_string(dir.path().join("loss_B.csv")).unwrap();
    assert_eq!(
        loss.lines().next().unwrap(),
        "time_s,original,onelevel,twolevel"
    );
    assert_eq!(loss.lines().nth(1).unwrap(), "0.000000,0,0,0");
    let delay = fs::read_to_string(dir.path().join("delay_B_twolevel.csv")).unwrap();
    assert_eq!(delay.lines().nth(1).unwrap(), "0,0.500000,0.083520");
}

#[test]
fn plot_files_are_byte_identical_across_runs() {
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let files = emit_plotdata(&report(ScenarioId::C), d1.path()).unwrap();
    emit_plotdata(&report(ScenarioId::C), d2.path()).unwrap();
    for f in files {
        let name = f.file_name().unwrap();
        assert_eq!(
            fs::read(&f).unwrap(),
            fs::read(d2.path().join(name)).unwrap(),
            "{name:?}"
        );
    }
}

#[test]
fn files_hold_only_requested_strategies_in_order() {
    let mut cfg = ScenarioConfig::builtin(ScenarioId::D).unwrap();
    cfg.strategies = vec![Strategy::TwoLevelUp, Strategy::OriginalMip];
    let r = run_scenario(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_plotdata(&r, dir.path()).unwrap();
    let loss = fs::read_to_string(dir.path().join("loss_D.csv")).unwrap();
    assert_eq!(loss.lines().next().unwrap(), "time_s,twolevel,original");
    assert!(!dir.path().join("delay_D_onelevel.csv").exists());
    let reg = fs::read_to_string(dir.path().join("registration_D.csv")).unwrap();
    assert_eq!(
        reg.lines().next().unwrap(),
        "via_fa,twolevel,original,improvement_vs_original"
    );
}

#[test]
fn unwritable_output_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let target = blocker.join("out");
    let err = emit_plotdata(&report(ScenarioId::A), &target).unwrap_err();
    assert!(matches!(err, HarnessError::Io { .. }));
    assert!(
        err.to_string().contains(&*blocker.to_string_lossy()),
        "{err}"
    );
}

#[test]
fn scenario_file_with_custom_topology() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("net.toml"),
        r#"
[[node]]
address = "0.0.0"
parent = "root"
kind = "correspondent_host"
[[node]]
address = "1.0.0"
parent = "0.0.0"
kind = "router"
[[node]]
address = "1.1.0"
parent = "1.0.0"
kind = "router"
[[node]]
address = "1.2.0"
parent = "1.1.0"
kind = "home_agent"
[[node]]
address = "1.2.1"
parent = "1.2.0"
kind = "mobile_host"
[[node]]
address = "0.5.0"
parent = "0.0.0"
kind = "foreign_agent"
"#,
    )
    .unwrap();
    let path = dir.path().join("late.toml");
    fs::write(
        &path,
        "topology = \"net.toml\"\nstrategy = \"all\"\n[[handoff]]\ntime_s = 8.0\ntarget_fa = \"0.5.0\"\n",
    )
    .unwrap();
    let cfg = ScenarioConfig::resolve(path.to_str().unwrap()).unwrap();
    assert_eq!(cfg.id, ScenarioId::Custom("late".into()));
    let r = run_scenario(&cfg).unwrap();
    let hops: Vec<usize> = r.strategies.iter().map(|m| m.data_hops()).collect();
    assert_eq!(hops, [7, 5, 3]);
    assert!(r
        .strategies
        .iter()
        .all(|m| m.conserves() && m.registration.is_some()));
}

#[test]
fn invalid_configs_fail_before_running() {
    let mut cfg = ScenarioConfig::builtin(ScenarioId::A).unwrap();
    cfg.strategies.clear();
    assert!(matches!(run_scenario(&cfg), Err(HarnessError::Config(_))));
    assert!(ScenarioConfig::resolve("/no/such/scenario.toml").is_err());
}

#[test]
fn bundled_example_scenario_runs() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/scenario_example.toml");
    let cfg = ScenarioConfig::resolve(path).unwrap();
    assert_eq!(cfg.handoffs.len(), 2);
    let r = run_scenario(&cfg).unwrap();
    for m in &r.strategies {
        assert!(m.conserves());
        let accepted = m.trace.registrations.len();
        assert_eq!(accepted, 2, "{:?}", m.strategy);
    }
}
