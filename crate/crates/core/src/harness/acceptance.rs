//! The acceptance suite behind `mipsim verify`.
//!
//! Each criterion yields one [`CriterionResult`]. A red result is reported
//! as such; nothing here relaxes a check to make it pass.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{RegistrationEndpoint, Strategy};
use crate::engine::{
    self, CbrSource, HandoffStep, MobileSetup, SimParams, SimTime, TraceEvent, World,
};
use crate::protocol::{EncapMode, Packet, PacketKind};
use crate::topology::{hop_count, HierAddress, LinkParams, NodeKind, Topology};

use super::{improvement, run_scenario, HarnessError, MetricsReport, ScenarioConfig, ScenarioId};

/// Delays closer than this are "equal" when checking orderings. It is the
/// resolution at which the reference delay curves are read.
pub const DELAY_EQUALITY_TOLERANCE_S: f64 = 1e-3;
/// Relative band around each reference registration-time ratio.
pub const RATIO_TOLERANCE: f64 = 0.10;
pub const RANDOM_CASES: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }
}

fn result(id: u8, name: &'static str, failures: Vec<String>, ok_detail: String) -> CriterionResult {
    CriterionResult {
        id,
        name,
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            ok_detail
        } else {
            failures.join("; ")
        },
    }
}

fn addr(s: &str) -> HierAddress {
    s.parse().expect("literal address")
}

fn path(s: &str) -> Vec<HierAddress> {
    s.split_whitespace().map(addr).collect()
}

fn fmt_path(p: &[HierAddress]) -> String {
    p.iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Reports for the five built-in scenarios, keyed by label.
pub fn builtin_reports() -> Result<BTreeMap<String, MetricsReport>, HarnessError> {
    ScenarioId::BUILTIN
        .into_iter()
        .map(|id| {
            let label = id.label().to_string();
            run_scenario(&ScenarioConfig::builtin(id)?).map(|r| (label, r))
        })
        .collect()
}

/// Runs all eight criteria.
pub fn run_all() -> Result<Vec<CriterionResult>, HarnessError> {
    let reports = builtin_reports()?;
    Ok(vec![
        path_reproduction(),
        hop_count_matrix(),
        delay_ordering(&reports),
        registration_ratios(&reports),
        loss_dominance(&reports),
        conservation_and_determinism(RANDOM_CASES),
        traffic_arithmetic(&reports),
        at_home_transparency(&reports),
    ])
}

pub fn path_reproduction() -> CriterionResult {
    let topo = Topology::reference(LinkParams::default());
    let (cn, ha, coa) = (addr("0.0.0"), addr("1.2.0"), addr("1.5.0"));
    let expected = [
        (
            Strategy::OriginalMip,
            path("0.0.0 1.0.0 1.1.0 1.2.0 1.1.0 1.0.0 1.4.0 1.5.0"),
        ),
        (Strategy::TwoLevelUp, path("0.0.0 1.0.0 1.4.0 1.5.0")),
    ];
    let mut failures = Vec::new();
    for (s, want) in expected {
        match topo.strategy_route(cn, ha, coa, s) {
            Ok(got) if got == want => {}
            Ok(got) => failures.push(format!(
                "{s}: got ({}) want ({})",
                fmt_path(&got),
                fmt_path(&want)
            )),
            Err(e) => failures.push(format!("{s}: {e}")),
        }
    }
    result(
        1,
        "path reproduction",
        failures,
        "original and twolevel routes match exactly".into(),
    )
}

/// Hop distances by breadth-first search over the link set, independent of
/// the tree-ancestor routing the simulator uses.
pub fn bfs_distances(topo: &Topology, from: HierAddress) -> BTreeMap<HierAddress, usize> {
    let mut adj: BTreeMap<HierAddress, Vec<HierAddress>> = BTreeMap::new();
    for l in topo.links() {
        let (a, b) = l.endpoints;
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut dist = BTreeMap::from([(from, 0)]);
    let mut queue = VecDeque::from([from]);
    while let Some(n) = queue.pop_front() {
        let d = dist[&n];
        for &m in adj.get(&n).into_iter().flatten() {
            if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(m) {
                e.insert(d + 1);
                queue.push_back(m);
            }
        }
    }
    dist
}

/// Edges on the data path when tunneling starts at `anchor`.
pub fn bfs_data_hops(
    topo: &Topology,
    cn: HierAddress,
    anchor: HierAddress,
    coa: HierAddress,
) -> usize {
    bfs_distances(topo, cn)[&anchor] + bfs_distances(topo, anchor)[&coa]
}

pub fn hop_count_matrix() -> CriterionResult {
    let topo = Topology::reference(LinkParams::default());
    let (cn, ha) = (addr("0.0.0"), addr("1.2.0"));
    let table = [
        ("1.3.0", [5, 3, 3]),
        ("1.5.0", [7, 5, 3]),
        ("0.2.1", [8, 6, 4]),
        ("0.1.0", [7, 5, 3]),
    ];
    let mut failures = Vec::new();
    for (fa, want) in table {
        let coa = addr(fa);
        for (s, want) in Strategy::ALL.into_iter().zip(want) {
            let anchor = match s.interception_node(&topo, ha) {
                Ok(a) => a,
                Err(e) => {
                    failures.push(e.to_string());
                    continue;
                }
            };
            let oracle = bfs_data_hops(&topo, cn, anchor, coa);
            let sim = topo.strategy_route(cn, ha, coa, s).map(|p| hop_count(&p));
            if oracle != want || sim.as_ref().ok() != Some(&want) {
                failures.push(format!(
                    "{fa} {s}: table {want}, bfs {oracle}, route {sim:?}"
                ));
            }
        }
    }
    let a_one = topo.strategy_route(cn, ha, addr("1.3.0"), Strategy::OneLevelUp);
    let a_two = topo.strategy_route(cn, ha, addr("1.3.0"), Strategy::TwoLevelUp);
    if a_one.as_ref().map(|p| hop_count(p)).ok() != a_two.as_ref().map(|p| hop_count(p)).ok() {
        failures.push("scenario A onelevel and twolevel paths differ in length".into());
    }
    result(
        2,
        "hop-count matrix",
        failures,
        "(5,3,3) (7,5,3) (8,6,4) (7,5,3) agree with a BFS oracle".into(),
    )
}

fn steady(r: &MetricsReport, s: Strategy) -> Option<f64> {
    r.get(s).and_then(|m| m.steady_state_delay_s)
}

pub fn delay_ordering(reports: &BTreeMap<String, MetricsReport>) -> CriterionResult {
    use Strategy::*;
    let tol = DELAY_EQUALITY_TOLERANCE_S;
    let mut failures = Vec::new();
    let mut shown = Vec::new();
    for (label, strict_low) in [("A", false), ("B", true), ("C", true), ("D", true)] {
        let Some(r) = reports.get(label) else {
            failures.push(format!("{label}: no report"));
            continue;
        };
        let (Some(o), Some(one), Some(two)) = (
            steady(r, OriginalMip),
            steady(r, OneLevelUp),
            steady(r, TwoLevelUp),
        ) else {
            failures.push(format!("{label}: missing steady-state delay"));
            continue;
        };
        shown.push(format!("{label} {two:.6}/{one:.6}/{o:.6}"));
        let low_ok = if strict_low {
            one - two > tol
        } else {
            (one - two).abs() <= tol
        };
        if !low_ok {
            let want = if strict_low { "<" } else { "==" };
            failures.push(format!(
                "{label}: twolevel {two:.6} {want} onelevel {one:.6} does not hold"
            ));
        }
        if o - one <= tol {
            failures.push(format!(
                "{label}: onelevel {one:.6} < original {o:.6} does not hold"
            ));
        }
    }
    result(
        3,
        "delay ordering",
        failures,
        format!("two/one/orig steady delays (s): {}", shown.join(", ")),
    )
}

fn reg(r: &MetricsReport, s: Strategy) -> Option<f64> {
    r.get(s).and_then(|m| m.registration_time_s)
}

pub fn registration_ratios(reports: &BTreeMap<String, MetricsReport>) -> CriterionResult {
    use Strategy::*;
    let mut failures = Vec::new();
    let mut shown = Vec::new();
    let checks = [
        ("B", TwoLevelUp, 0.406199 / 0.808378),
        ("D", TwoLevelUp, 0.5020),
        ("B", OneLevelUp, 0.606031 / 0.808378),
    ];
    for (label, cand, reference) in checks {
        let Some(r) = reports.get(label) else {
            failures.push(format!("{label}: no report"));
            continue;
        };
        if r.config.params.registration_terminates_at != RegistrationEndpoint::Interceptor {
            failures.push(format!(
                "{label}: registrations must terminate at the interceptor"
            ));
        }
        let (Some(base), Some(c)) = (reg(r, OriginalMip), reg(r, cand)) else {
            failures.push(format!("{label}: missing registration time"));
            continue;
        };
        let ratio = c / base;
        let via = r.config.first_target();
        shown.push(format!(
            "{cand}/original via {via} = {ratio:.4} (ref {reference:.4})"
        ));
        if (ratio - reference).abs() > RATIO_TOLERANCE * reference {
            failures.push(format!(
                "{cand}/original via {via} = {ratio:.4}, outside ±10% of {reference:.4}"
            ));
        }
    }
    for (b, c, want) in [(0.808378, 0.406199, "49.75"), (0.606031, 0.406199, "32.97")] {
        match improvement(b, c) {
            Ok(v) if format!("{v:.2}") == want => {
                shown.push(format!("improvement({b}, {c}) = {v:.8}"))
            }
            Ok(v) => failures.push(format!("improvement({b}, {c}) = {v}, want {want}")),
            Err(e) => failures.push(e.to_string()),
        }
    }
    result(4, "registration-time ratios", failures, shown.join(", "))
}

/// Loss-ordering violations across the built-in scenarios, as
/// `(scenario, description)`.
pub fn loss_dominance_violations(
    reports: &BTreeMap<String, MetricsReport>,
) -> Vec<(String, String)> {
    use Strategy::*;
    let mut out = Vec::new();
    for (label, r) in reports {
        let loss = |s| r.get(s).map(|m| m.loss_in_handoff_window);
        let (Some(o), Some(one), Some(two)) =
            (loss(OriginalMip), loss(OneLevelUp), loss(TwoLevelUp))
        else {
            out.push((label.clone(), "missing strategy".into()));
            continue;
        };
        let strict = matches!(label.as_str(), "B" | "C" | "D");
        let ok_low = if strict { two < one } else { two <= one };
        let ok_high = if strict { one < o } else { one <= o };
        let rel = if strict { "<" } else { "<=" };
        if !ok_low {
            out.push((
                label.clone(),
                format!("twolevel {two} {rel} onelevel {one} fails"),
            ));
        }
        if !ok_high {
            out.push((
                label.clone(),
                format!("onelevel {one} {rel} original {o} fails"),
            ));
        }
    }
    out
}

pub fn loss_dominance(reports: &BTreeMap<String, MetricsReport>) -> CriterionResult {
    let shown: Vec<String> = reports
        .iter()
        .map(|(label, r)| {
            let l: Vec<String> = r
                .strategies
                .iter()
                .map(|m| m.loss_in_handoff_window.to_string())
                .collect();
            format!("{label} {}", l.join("/"))
        })
        .collect();
    let failures: Vec<String> = loss_dominance_violations(reports)
        .into_iter()
        .map(|(l, d)| format!("{l}: {d}"))
        .collect();
    let mut res = result(5, "loss dominance", failures, String::new());
    let prefix = format!("window losses orig/one/two: {}", shown.join(", "));
    res.detail = if res.detail.is_empty() {
        prefix
    } else {
        format!("{prefix}; {}", res.detail)
    };
    res
}

/// A small random hierarchy with one home agent and a scripted itinerary
/// for its mobile host.
pub fn random_world(seed: u64) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let defaults = LinkParams {
        delay: Duration::from_millis(rng.random_range(1..30)),
        bandwidth: rng.random_range(100_000..10_000_000),
    };
    let mut topo = Topology::new(defaults);
    let mut next = 0u16;
    let mut fresh = || {
        next += 1;
        HierAddress::new(0, next, 0)
    };
    let root = HierAddress::new(0, 0, 0);
    topo.add_node(root, None, NodeKind::CorrespondentHost)
        .expect("root");
    let mut wired = vec![(root, 0u32)];
    let mut agents = Vec::new();
    // A spine deep enough for two levels of interception above the HA.
    let r1 = fresh();
    let r2 = fresh();
    let ha = fresh();
    topo.add_node(r1, Some(root), NodeKind::Router)
        .expect("spine");
    topo.add_node(r2, Some(r1), NodeKind::Router)
        .expect("spine");
    topo.add_node(ha, Some(r2), NodeKind::HomeAgent)
        .expect("spine");
    wired.extend([(r1, 1), (r2, 2), (ha, 3)]);
    agents.push(ha);
    for _ in 0..rng.random_range(2..12) {
        let candidates: Vec<_> = wired.iter().filter(|(_, lvl)| *lvl < 3).copied().collect();
        let (parent, lvl) = candidates[rng.random_range(0..candidates.len())];
        let a = fresh();
        let kind = if rng.random_bool(0.5) {
            NodeKind::ForeignAgent
        } else {
            NodeKind::Router
        };
        topo.add_node(a, Some(parent), kind)
            .expect("generated node");
        wired.push((a, lvl + 1));
        if kind == NodeKind::ForeignAgent {
            agents.push(a);
        }
    }
    if agents.len() == 1 {
        let a = fresh();
        topo.add_node(a, Some(root), NodeKind::ForeignAgent)
            .expect("fallback agent");
        wired.push((a, 1));
        agents.push(a);
    }
    let mn = HierAddress::new(0, 0, 1);
    topo.add_node(mn, Some(ha), NodeKind::MobileHost)
        .expect("mobile host");

    let sim_time = rng.random_range(3.0..12.0);
    let params = SimParams {
        rate: rng.random_range(1.0..40.0),
        packet_size: rng.random_range(20..1400),
        sim_time,
        traffic_start: rng.random_range(0.0..1.0),
        control_processing_delay: rng.random_range(0.0..0.1),
        attach_latency: rng.random_range(0.0..0.3),
        advertisement_interval: rng.random_range(0.2..1.5),
        advertisement_jitter: rng.random_range(0.0..0.2),
        lifetime: rng.random_range(1.0..10.0),
        encapsulation: EncapMode::ALL[rng.random_range(0..3)],
        registration_terminates_at: if rng.random_bool(0.5) {
            RegistrationEndpoint::Interceptor
        } else {
            RegistrationEndpoint::HomeAgent
        },
        solicit_on_attach: rng.random_bool(0.3),
        ..SimParams::default()
    };
    let start = agents[rng.random_range(0..agents.len())];
    let mut handoffs = Vec::new();
    let mut at = start;
    let mut t = 0.0;
    for _ in 0..rng.random_range(0..4) {
        t += rng.random_range(0.2..sim_time / 2.0);
        if t > sim_time {
            break;
        }
        let target = agents[rng.random_range(0..agents.len())];
        if target == at {
            continue;
        }
        handoffs.push(HandoffStep {
            at: SimTime::from_secs_f64(t),
            target,
        });
        at = target;
    }
    let (cn, _) = wired[rng.random_range(0..wired.len())];
    let traffic: Vec<CbrSource> = (0..rng.random_range(1..3))
        .map(|_| {
            let mut src = params.cbr(cn, mn);
            src.src = wired[rng.random_range(0..wired.len())].0;
            src
        })
        .collect();
    World {
        topology: topo,
        strategy: Strategy::ALL[rng.random_range(0..3)],
        mobile: Some(MobileSetup {
            home_address: mn,
            home_agent: ha,
            initial_attachment: start,
        }),
        traffic,
        handoffs,
        seed,
        params,
    }
}

/// `(sent, received, lost, in_flight)` for data packets in a trace.
pub fn data_accounting(trace: &engine::TraceLog, mn: HierAddress) -> (u64, u64, u64, u64) {
    let mut sent = 0;
    let mut recv = 0;
    let mut lost = 0;
    for r in trace
        .records
        .iter()
        .filter(|r| r.pkt_kind == Some(PacketKind::Data))
    {
        match r.event {
            TraceEvent::Send => sent += 1,
            TraceEvent::Recv if r.node == mn => recv += 1,
            TraceEvent::Drop => lost += 1,
            _ => {}
        }
    }
    (sent, recv, lost, trace.data_in_flight)
}

pub fn conservation_and_determinism(cases: u64) -> CriterionResult {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d69_7073);
    let mut packets = 0;
    for case in 0..cases {
        let world = random_world(case);
        let mn = world
            .mobile
            .expect("random worlds have a mobile host")
            .home_address;
        let (first, second) = match (engine::run(&world), engine::run(&world)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        if first != second {
            failures.push(format!("case {case}: replay differs"));
        }
        let (sent, recv, lost, flight) = data_accounting(&first, mn);
        packets += sent;
        if sent != recv + lost + flight {
            failures.push(format!(
                "case {case}: sent {sent} != {recv} + {lost} + {flight}"
            ));
        }

        let a = world
            .topology
            .nodes()
            .next()
            .map(|n| n.address)
            .unwrap_or(mn);
        let pkt = Packet::data(
            a,
            mn,
            rng.random_range(0..2000),
            case,
            SimTime::from_nanos(rng.random()),
        );
        for mode in EncapMode::ALL {
            let back = pkt
                .clone()
                .encapsulate(mode, a, a)
                .and_then(|p| p.decapsulate(a));
            if back.as_ref() != Ok(&pkt) {
                failures.push(format!(
                    "case {case}: {mode:?} round-trip changed the packet"
                ));
            }
        }
    }
    result(
        6,
        "conservation and determinism",
        failures,
        format!("{cases} random worlds, {packets} data packets, replay-identical, encapsulation round-trips"),
    )
}

pub fn traffic_arithmetic(reports: &BTreeMap<String, MetricsReport>) -> CriterionResult {
    let mut failures = Vec::new();
    let params = SimParams::default();
    let src = params.cbr(addr("0.0.0"), addr("1.2.1"));
    if src.expected_packets() != 98 {
        failures.push(format!("expected_packets = {}", src.expected_packets()));
    }
    for (label, r) in reports {
        for m in &r.strategies {
            if m.sent != 98 {
                failures.push(format!("{label} {}: sent {}", m.strategy, m.sent));
            }
        }
    }
    let topo = Topology::reference(params.link_params());
    let link = topo
        .link(addr("0.0.0"), addr("1.0.0"))
        .expect("reference link");
    let got = link.latency(220);
    if got != Duration::from_micros(20_880) {
        failures.push(format!("220-byte hop latency {got:?}, want 20.88 ms"));
    }
    result(
        7,
        "traffic arithmetic",
        failures,
        "98 packets per run, 220-byte hop latency 0.020880 s".into(),
    )
}

pub fn at_home_transparency(reports: &BTreeMap<String, MetricsReport>) -> CriterionResult {
    let mut failures = Vec::new();
    let mut cfg = ScenarioConfig::builtin(ScenarioId::B).expect("built-in");
    cfg.handoffs.clear();
    let topo = cfg.load_topology().expect("reference topology");
    let mut csvs = Vec::new();
    for s in Strategy::ALL {
        match engine::run(&cfg.world(topo.clone(), s)) {
            Ok(trace) => {
                let pushes = trace
                    .records
                    .iter()
                    .filter(|r| r.event == TraceEvent::TunnelPush)
                    .count();
                if pushes != 0 {
                    failures.push(format!("at home, {s} pushed {pushes} tunnel headers"));
                }
                csvs.push(trace.to_csv_string());
            }
            Err(e) => failures.push(format!("at home, {s}: {e}")),
        }
    }
    if csvs.windows(2).any(|w| w[0] != w[1]) {
        failures.push("at-home traces differ between strategies".into());
    }

    match reports.get("E") {
        None => failures.push("E: no report".into()),
        Some(e) => {
            let settled = e
                .strategies
                .iter()
                .filter_map(|m| m.registration.as_ref().map(|r| r.t_reply.as_secs_f64()))
                .fold(f64::NEG_INFINITY, f64::max);
            let mut series = Vec::new();
            for m in &e.strategies {
                if m.tunneled_after_registration != 0 {
                    failures.push(format!(
                        "E {}: {} tunneled packets after returning home",
                        m.strategy, m.tunneled_after_registration
                    ));
                }
                let after: Vec<(u64, f64)> = m
                    .delays
                    .iter()
                    .filter(|d| d.send_time_s >= settled)
                    .map(|d| (d.seq, d.delay_s))
                    .collect();
                series.push(after);
            }
            if series.iter().any(|s| s.is_empty()) || series.windows(2).any(|w| w[0] != w[1]) {
                failures.push("E: post-return delays differ between strategies".into());
            }
        }
    }
    result(
        8,
        "at-home transparency",
        failures,
        "identical at-home traces, no tunnels after return in E".into(),
    )
}
