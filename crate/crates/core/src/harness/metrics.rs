use std::collections::BTreeMap;
use std::thread;

use crate::agents::{registration_flow, Strategy};
use crate::engine::{self, RegistrationRecord, SimTime, TraceEvent, TraceLog};
use crate::protocol::{PacketKind, RegistrationStatus};
use crate::topology::{hop_count, HierAddress, Topology};

use super::{HarnessError, ScenarioConfig};

/// One delivered data packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySample {
    pub seq: u64,
    pub send_time_s: f64,
    pub delay_s: f64,
}

#[derive(Debug, Clone)]
pub struct StrategyMetrics {
    pub strategy: Strategy,
    /// End-to-end delay of every delivered data packet, by send time.
    pub delays: Vec<DelaySample>,
    pub sent: u64,
    pub received: u64,
    pub lost: u64,
    pub in_flight: u64,
    /// Times at which data packets were dropped, ascending.
    pub loss_times_s: Vec<f64>,
    pub loss_in_handoff_window: u64,
    /// First accepted registration started at or after the first handoff.
    pub registration: Option<RegistrationRecord>,
    pub registration_time_s: Option<f64>,
    /// Wired data path from the correspondent to the first handoff target.
    pub data_path: Vec<HierAddress>,
    /// Wired edges crossed by that registration's request and reply.
    pub registration_rtt_hops: usize,
    /// Largest delay among packets sent inside the handoff window.
    pub handoff_peak_delay_s: Option<f64>,
    /// Median delay of packets sent after the registration completed.
    pub steady_state_delay_s: Option<f64>,
    /// Tunnel encapsulations after the registration completed.
    pub tunneled_after_registration: u64,
    pub trace: TraceLog,
}

impl StrategyMetrics {
    pub fn data_hops(&self) -> usize {
        hop_count(&self.data_path)
    }

    /// sent = received + lost + in flight.
    pub fn conserves(&self) -> bool {
        self.sent == self.received + self.lost + self.in_flight
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Improvement {
    pub baseline: Strategy,
    pub candidate: Strategy,
    pub percent: f64,
}

#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub config: ScenarioConfig,
    /// In the order the config requested.
    pub strategies: Vec<StrategyMetrics>,
    /// Registration-time improvement for every ordered pair of requested
    /// strategies, baseline first.
    pub improvements: Vec<Improvement>,
}

impl MetricsReport {
    pub fn get(&self, s: Strategy) -> Option<&StrategyMetrics> {
        self.strategies.iter().find(|m| m.strategy == s)
    }

    pub fn improvement(&self, baseline: Strategy, candidate: Strategy) -> Option<f64> {
        self.improvements
            .iter()
            .find(|i| i.baseline == baseline && i.candidate == candidate)
            .map(|i| i.percent)
    }

    /// Human-readable summary, one block per strategy.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "scenario {}: {} -> {} (cn {}, mn {})\n",
            self.config.id,
            self.config.start_at,
            self.config.first_target(),
            self.config.cn,
            self.config.mn
        );
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
        for m in &self.strategies {
            out += &format!(
                "  {:<9} hops={} reg_rtt_hops={} reg_time={} steady_delay={} peak_delay={} loss={} (window {}) sent={} recv={} in_flight={}{}\n",
                m.strategy.name(),
                m.data_hops(),
                m.registration_rtt_hops,
                opt(m.registration_time_s),
                opt(m.steady_state_delay_s),
                opt(m.handoff_peak_delay_s),
                m.lost,
                m.loss_in_handoff_window,
                m.sent,
                m.received,
                m.in_flight,
                if m.conserves() { "" } else { " CONSERVATION VIOLATED" },
            );
        }
        for i in &self.improvements {
            out += &format!(
                "  improvement {} vs {}: {:.6}%\n",
                i.candidate, i.baseline, i.percent
            );
        }
        out
    }
}

/// `(baseline - candidate) / baseline * 100`.
pub fn improvement(baseline_s: f64, candidate_s: f64) -> Result<f64, HarnessError> {
    if !(baseline_s.is_finite() && baseline_s > 0.0) || !candidate_s.is_finite() {
        return Err(HarnessError::Domain(format!(
            "improvement needs a positive baseline, got baseline {baseline_s} and candidate {candidate_s}"
        )));
    }
    Ok((baseline_s - candidate_s) / baseline_s * 100.0)
}

/// Runs every requested strategy on its own thread and extracts metrics.
/// Configuration problems surface before any simulation starts.
pub fn run_scenario(config: &ScenarioConfig) -> Result<MetricsReport, HarnessError> {
    let topo = config.load_topology()?;
    config.validate(&topo)?;

    let traces: Vec<Result<TraceLog, engine::SimError>> = thread::scope(|scope| {
        let handles: Vec<_> = config
            .strategies
            .iter()
            .map(|&s| {
                let world = config.world(topo.clone(), s);
                scope.spawn(move || engine::run(&world))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });

    let mut strategies = Vec::with_capacity(traces.len());
    for (&s, trace) in config.strategies.iter().zip(traces) {
        strategies.push(extract(config, &topo, s, trace?)?);
    }

    let mut improvements = Vec::new();
    for (i, base) in strategies.iter().enumerate() {
        for cand in &strategies[i + 1..] {
            let (b, c) = if base.strategy < cand.strategy {
                (base, cand)
            } else {
                (cand, base)
            };
            if let (Some(bt), Some(ct)) = (b.registration_time_s, c.registration_time_s) {
                improvements.push(Improvement {
                    baseline: b.strategy,
                    candidate: c.strategy,
                    percent: improvement(bt, ct)?,
                });
            }
        }
    }
    improvements.sort_by_key(|i| (i.baseline, i.candidate));

    Ok(MetricsReport {
        config: config.clone(),
        strategies,
        improvements,
    })
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

fn extract(
    config: &ScenarioConfig,
    topo: &Topology,
    strategy: Strategy,
    trace: TraceLog,
) -> Result<StrategyMetrics, HarnessError> {
    let is_data = |r: &&engine::TraceRecord| r.pkt_kind == Some(PacketKind::Data);
    let mut send_times: BTreeMap<u64, SimTime> = BTreeMap::new();
    let mut sent = 0;
    let mut delays = Vec::new();
    let mut loss_times_s = Vec::new();
    for r in trace.records.iter().filter(is_data) {
        let seq = r.seq.expect("data records carry a sequence number");
        match r.event {
            TraceEvent::Send => {
                sent += 1;
                send_times.insert(seq, r.time);
            }
            TraceEvent::Recv if r.node == config.mn => {
                let t0 = send_times[&seq];
                delays.push(DelaySample {
                    seq,
                    send_time_s: t0.as_secs_f64(),
                    delay_s: (r.time - t0).as_secs_f64(),
                });
            }
            TraceEvent::Drop => loss_times_s.push(r.time.as_secs_f64()),
            _ => {}
        }
    }
    let (lo, hi) = config.handoff_window;
    let in_window = |t: f64| t >= lo && t <= hi;
    let loss_in_handoff_window = loss_times_s.iter().filter(|&&t| in_window(t)).count() as u64;

    let first_handoff = config.handoffs.first().map(|h| h.at);
    let registration = trace
        .registrations
        .iter()
        .find(|r| {
            r.status == RegistrationStatus::Accepted
                && first_handoff.is_none_or(|h| r.t_request >= h)
        })
        .cloned();
    let registration_time_s = registration.as_ref().map(|r| r.duration().as_secs_f64());

    let target = config.first_target();
    let data_path = topo.strategy_route(config.cn, config.home_agent, target, strategy)?;
    let registration_rtt_hops = registration_flow(
        topo,
        strategy,
        config.params.registration_terminates_at,
        config.mn,
        config.home_agent,
        target,
    )?
    .wired_round_trip_hops();

    let handoff_peak_delay_s = delays
        .iter()
        .filter(|d| in_window(d.send_time_s))
        .map(|d| d.delay_s)
        .max_by(f64::total_cmp);
    let settled = registration.as_ref().map(|r| r.t_reply);
    let steady_state_delay_s = settled.and_then(|t| {
        median(
            delays
                .iter()
                .filter(|d| d.send_time_s >= t.as_secs_f64())
                .map(|d| d.delay_s)
                .collect(),
        )
    });
    let tunneled_after_registration = settled
        .map(|t| {
            trace
                .records
                .iter()
                .filter(|r| r.event == TraceEvent::TunnelPush && r.time > t)
                .count() as u64
        })
        .unwrap_or(0);

    let received = delays.len() as u64;
    let lost = loss_times_s.len() as u64;
    Ok(StrategyMetrics {
        strategy,
        delays,
        sent,
        received,
        lost,
        in_flight: trace.data_in_flight,
        loss_times_s,
        loss_in_handoff_window,
        registration,
        registration_time_s,
        data_path,
        registration_rtt_hops,
        handoff_peak_delay_s,
        steady_state_delay_s,
        tunneled_after_registration,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improvement_arithmetic() {
        let x = improvement(2.0, 1.5).unwrap();
        assert!((x - 25.0).abs() < 1e-12);
        assert_eq!(improvement(0.3, 0.3).unwrap(), 0.0);
        assert!(improvement(1.0, 1.2).unwrap() < 0.0);
    }

    #[test]
    fn improvement_domain() {
        assert!(matches!(
            improvement(0.0, 1.0),
            Err(HarnessError::Domain(_))
        ));
        assert!(matches!(
            improvement(-1.0, 1.0),
            Err(HarnessError::Domain(_))
        ));
        assert!(improvement(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![]), None);
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }
}
