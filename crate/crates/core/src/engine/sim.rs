use std::collections::BTreeMap;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{self, AgentPolicy, DeliveryAction, ForwardAction, MnState, ReplyOutcome};
use crate::protocol::{
    AgentAdvertisement, AgentSolicitation, BindingChange, BindingForward, BindingTable, Body,
    EncapMode, Packet, PacketKind, RegistrationReply, RegistrationRequest, RegistrationStatus,
    VisitorEntry, VisitorList, VisitorOutcome,
};
use crate::topology::{HierAddress, NodeKind, Topology};

use super::{
    cbr_tick, DropReason, EventKind, EventQueue, MobilityEvent, RegistrationRecord, SimError,
    SimTime, TableAction, TraceEvent, TraceLog, TraceRecord, World,
};

/// Per-node mobility state. Every wired node carries one so that any
/// router can act as an interception point.
#[derive(Debug, Default)]
struct NodeTables {
    bindings: BindingTable,
    visitors: VisitorList,
    adv_sequence: u32,
    last_aged: SimTime,
}

#[derive(Debug, Clone, Copy)]
struct PendingRegistration {
    id: u32,
    t_request: SimTime,
    via: HierAddress,
    coa: HierAddress,
    deregistration: bool,
}

struct Mobile {
    state: MnState,
    /// Agent whose wireless link the host is on, if any.
    link: Option<HierAddress>,
    /// Data deliveries are accepted only while registered.
    reachable: bool,
    pending: Option<PendingRegistration>,
}

struct Sim<'w> {
    world: &'w World,
    topo: Topology,
    queue: EventQueue,
    trace: TraceLog,
    tables: BTreeMap<HierAddress, NodeTables>,
    mobile: Option<Mobile>,
    home_agent: HierAddress,
    interceptor: HierAddress,
    registrar: HierAddress,
    forward_target: Option<HierAddress>,
    link_free: BTreeMap<(HierAddress, HierAddress), SimTime>,
    rng: ChaCha8Rng,
    sent_per_source: Vec<u64>,
    horizon: SimTime,
    processing: Duration,
    lifetime: Duration,
    adv_interval: Duration,
    adv_jitter_ns: u64,
    attach_latency: Duration,
    encap: EncapMode,
    policy: AgentPolicy,
}

/// Executes the world until its horizon and returns the ordered trace.
/// Identical worlds (seed included) produce identical traces.
pub fn run(world: &World) -> Result<TraceLog, SimError> {
    let mut sim = Sim::new(world)?;
    sim.bootstrap()?;
    while let Some(ev) = sim.queue.pop_until(sim.horizon) {
        sim.dispatch(ev.kind)?;
    }
    Ok(sim.finish())
}

fn secs(v: f64) -> Duration {
    Duration::from_secs_f64(v)
}

impl<'w> Sim<'w> {
    fn new(world: &'w World) -> Result<Self, SimError> {
        let params = &world.params;
        params.validate()?;
        let topo = world.topology.clone();
        let horizon = params.horizon();

        let (home_agent, interceptor, registrar, forward_target) = match &world.mobile {
            Some(m) => {
                let mn = topo.node(m.home_address)?;
                if mn.kind != NodeKind::MobileHost {
                    return Err(SimError::Config(format!(
                        "{} is not a mobile host",
                        m.home_address
                    )));
                }
                if topo.node(m.home_agent)?.kind != NodeKind::HomeAgent {
                    return Err(SimError::Config(format!(
                        "{} is not a home agent",
                        m.home_agent
                    )));
                }
                if !topo.node(m.initial_attachment)?.kind.is_mobility_agent() {
                    return Err(SimError::Config(format!(
                        "initial attachment {} is not a mobility agent",
                        m.initial_attachment
                    )));
                }
                let ep = params.registration_terminates_at;
                let interceptor = world.strategy.interception_node(&topo, m.home_agent)?;
                let registrar = agents::registrar(&topo, world.strategy, ep, m.home_agent)?;
                let fwd = agents::binding_forward_target(&topo, world.strategy, ep, m.home_agent)?;
                (m.home_agent, interceptor, registrar, fwd)
            }
            None => {
                let root = topo.root()?;
                (root, root, root, None)
            }
        };

        for src in &world.traffic {
            topo.node(src.src)?;
            match &world.mobile {
                Some(m) if m.home_address == src.dst_home_address => {}
                _ => {
                    return Err(SimError::Config(format!(
                        "traffic from {} targets {}, which is not the simulated mobile host",
                        src.src, src.dst_home_address
                    )))
                }
            }
            if !(src.rate.is_finite() && src.rate > 0.0) {
                return Err(SimError::Config(format!(
                    "traffic rate {} must be positive",
                    src.rate
                )));
            }
        }
        if !world.handoffs.is_empty() && world.mobile.is_none() {
            return Err(SimError::Config(
                "handoff script without a mobile host".into(),
            ));
        }

        let tables = topo
            .nodes()
            .filter(|n| n.kind.is_wired())
            .map(|n| (n.address, NodeTables::default()))
            .collect();

        let lifetime = secs(params.lifetime);
        Ok(Sim {
            world,
            topo,
            queue: EventQueue::new(),
            trace: TraceLog::default(),
            tables,
            mobile: None,
            home_agent,
            interceptor,
            registrar,
            forward_target,
            link_free: BTreeMap::new(),
            rng: ChaCha8Rng::seed_from_u64(world.seed),
            sent_per_source: vec![0; world.traffic.len()],
            horizon,
            processing: secs(params.control_processing_delay),
            lifetime,
            adv_interval: secs(params.advertisement_interval),
            adv_jitter_ns: secs(params.advertisement_jitter).as_nanos() as u64,
            attach_latency: secs(params.attach_latency),
            encap: params.encapsulation,
            policy: AgentPolicy {
                fa_max_lifetime: params.fa_max_lifetime.map(secs),
                accept_registrations: params.registrar_accepts,
                max_lifetime: lifetime,
            },
        })
    }

    fn now(&self) -> SimTime {
        self.queue.now()
    }

    fn fatal(&self, node: HierAddress, message: impl Into<String>) -> SimError {
        SimError::Fatal {
            time: self.now(),
            node,
            message: message.into(),
        }
    }

    fn schedule(&mut self, at: SimTime, kind: EventKind) -> Result<(), SimError> {
        self.queue.schedule(at, kind).map(|_| ())
    }

    fn jitter(&mut self) -> Duration {
        if self.adv_jitter_ns == 0 {
            Duration::ZERO
        } else {
            Duration::from_nanos(self.rng.random_range(0..self.adv_jitter_ns))
        }
    }

    fn record(
        &mut self,
        node: HierAddress,
        event: TraceEvent,
        pkt: Option<&Packet>,
        detail: String,
    ) {
        self.trace.records.push(TraceRecord {
            time: self.now(),
            node,
            event,
            seq: pkt.filter(|p| p.kind() == PacketKind::Data).map(|p| p.seq),
            pkt_kind: pkt.map(Packet::kind),
            wire_bytes: pkt.map(Packet::wire_size),
            detail,
        });
    }

    fn log_table(
        &mut self,
        node: HierAddress,
        action: TableAction,
        home_address: HierAddress,
        coa: Option<HierAddress>,
        lifetime: Option<Duration>,
    ) {
        self.trace.mobility.push(MobilityEvent {
            time: self.now(),
            node,
            action,
            home_address,
            coa,
            lifetime,
        });
        let detail = format!(
            "{} home={} coa={} lifetime={}",
            action.as_str(),
            home_address,
            coa.map(|c| c.to_string()).unwrap_or_default(),
            lifetime
                .map(|l| l.as_secs_f64().to_string())
                .unwrap_or_default()
        );
        self.record(node, TraceEvent::TableUpdate, None, detail);
    }

    fn bootstrap(&mut self) -> Result<(), SimError> {
        let world = self.world;
        let mut agents: Vec<HierAddress> = self
            .topo
            .nodes()
            .filter(|n| n.kind.is_mobility_agent())
            .map(|n| n.address)
            .collect();
        agents.sort();
        for agent in agents {
            let first = SimTime::ZERO + self.jitter();
            self.schedule(
                first,
                EventKind::AdvertisementTick {
                    agent,
                    periodic: true,
                },
            )?;
        }

        if let Some(setup) = world.mobile {
            let mut state = MnState::at_home(setup.home_address, setup.home_agent, self.lifetime);
            let at = setup.initial_attachment;
            self.topo.reattach(setup.home_address, at)?;
            if at != setup.home_agent {
                // Start already registered at the foreign agent.
                state = state.registered_at(at);
                let home = setup.home_address;
                let lifetime = self.lifetime;
                self.apply_binding(self.registrar, home, at, lifetime)?;
                if let Some(t) = self.forward_target {
                    self.apply_binding(t, home, at, lifetime)?;
                }
                self.tables
                    .get_mut(&at)
                    .expect("agents are wired")
                    .visitors
                    .insert_confirmed(VisitorEntry {
                        home_address: home,
                        home_agent: setup.home_agent,
                        link_layer_id: link_layer_id(home),
                        lifetime_remaining: lifetime,
                    });
                self.log_table(
                    at,
                    TableAction::VisitorConfirm,
                    home,
                    Some(at),
                    Some(lifetime),
                );
                self.arm_timer(at, lifetime)?;
            }
            self.mobile = Some(Mobile {
                state,
                link: Some(at),
                reachable: true,
                pending: None,
            });

            let mut attached = at;
            for step in &world.handoffs {
                let plan = agents::plan_handoff(
                    &self.topo,
                    attached,
                    step.target,
                    step.at,
                    self.attach_latency,
                    self.horizon,
                )
                .map_err(SimError::Config)?;
                self.schedule(
                    plan.detach_at,
                    EventKind::Detach {
                        mobile: setup.home_address,
                    },
                )?;
                self.schedule(
                    plan.attach_at,
                    EventKind::Attach {
                        mobile: setup.home_address,
                        agent: plan.to,
                    },
                )?;
                attached = plan.to;
            }
        }

        for (i, src) in world.traffic.iter().enumerate() {
            if src.start <= src.stop {
                self.schedule(src.start, EventKind::TrafficTick { source: i })?;
            }
        }
        Ok(())
    }

    fn finish(mut self) -> TraceLog {
        let in_flight = self
            .queue
            .pending()
            .filter(|e| matches!(&e.kind, EventKind::PacketArrival { pkt, .. } if pkt.kind() == PacketKind::Data))
            .count() as u64;
        self.trace.data_in_flight = in_flight;
        let root = self.topo.root().expect("validated at load");
        self.trace.records.push(TraceRecord {
            time: self.horizon,
            node: root,
            event: TraceEvent::Horizon,
            seq: None,
            pkt_kind: None,
            wire_bytes: None,
            detail: format!("data_in_flight={in_flight}"),
        });
        self.trace
    }

    fn dispatch(&mut self, kind: EventKind) -> Result<(), SimError> {
        match kind {
            EventKind::PacketArrival { node, from, pkt } => self.on_arrival(node, from, pkt),
            EventKind::TimerFire { node } => {
                self.age(node);
                Ok(())
            }
            EventKind::Detach { mobile } => self.on_detach(mobile),
            EventKind::Attach { mobile, agent } => self.on_attach(mobile, agent),
            EventKind::TrafficTick { source } => self.on_traffic(source),
            EventKind::AdvertisementTick { agent, periodic } => self.advertise(agent, periodic),
        }
    }

    fn mobile_address(&self) -> Option<HierAddress> {
        self.mobile.as_ref().map(|m| m.state.home_address)
    }

    fn on_traffic(&mut self, source: usize) -> Result<(), SimError> {
        let src = &self.world.traffic[source];
        let (pkt, next) = cbr_tick(src, self.now(), self.sent_per_source[source]);
        self.sent_per_source[source] += 1;
        self.record(
            pkt.src,
            TraceEvent::Send,
            Some(&pkt),
            format!("src={}", pkt.src),
        );
        if let Some(t) = next {
            self.schedule(t, EventKind::TrafficTick { source })?;
        }
        self.process(pkt.src, pkt)
    }

    fn on_detach(&mut self, mobile: HierAddress) -> Result<(), SimError> {
        let m = self.mobile.as_mut().expect("detach implies a mobile host");
        let from = m.link.take();
        m.state.detach();
        m.reachable = false;
        m.pending = None;
        let detail = format!("from={}", from.map(|f| f.to_string()).unwrap_or_default());
        self.record(mobile, TraceEvent::Detach, None, detail);
        Ok(())
    }

    fn on_attach(&mut self, mobile: HierAddress, agent: HierAddress) -> Result<(), SimError> {
        self.topo.reattach(mobile, agent)?;
        self.mobile
            .as_mut()
            .expect("attach implies a mobile host")
            .link = Some(agent);
        self.record(mobile, TraceEvent::Attach, None, format!("to={agent}"));
        if self.world.params.solicit_on_attach {
            let pkt = Packet::control(
                mobile,
                agent,
                self.now(),
                Body::Solicitation(AgentSolicitation { mobile }),
            );
            self.record(mobile, TraceEvent::Send, Some(&pkt), format!("to={agent}"));
            self.transmit(mobile, agent, pkt)
        } else {
            self.advertise(agent, false)
        }
    }

    fn advertise(&mut self, agent: HierAddress, periodic: bool) -> Result<(), SimError> {
        let kind = self.topo.node(agent)?.kind;
        let tables = self.tables.get_mut(&agent).expect("agents are wired");
        let sequence = tables.adv_sequence;
        tables.adv_sequence += 1;
        self.record(
            agent,
            TraceEvent::AdvertisementTick,
            None,
            format!("sequence={sequence}"),
        );
        if periodic {
            let next = self.now() + self.adv_interval + self.jitter();
            if next <= self.horizon {
                self.schedule(
                    next,
                    EventKind::AdvertisementTick {
                        agent,
                        periodic: true,
                    },
                )?;
            }
        }
        let Some(m) = &self.mobile else {
            return Ok(());
        };
        if m.link != Some(agent) {
            return Ok(());
        }
        let mobile = m.state.home_address;
        let adv = AgentAdvertisement {
            agent,
            offered_coa: agent,
            is_home_agent: kind == NodeKind::HomeAgent,
            is_foreign_agent: kind == NodeKind::ForeignAgent,
            lifetime: self.lifetime,
            sequence,
        };
        let pkt = Packet::control(agent, mobile, self.now(), Body::Advertisement(adv));
        self.transmit(agent, mobile, pkt)
    }

    /// Puts `pkt` on the link `from -> to`, FIFO behind earlier packets.
    fn transmit(
        &mut self,
        from: HierAddress,
        to: HierAddress,
        pkt: Packet,
    ) -> Result<(), SimError> {
        if let Some(mobile) = self.mobile_address() {
            if from == mobile || to == mobile {
                let agent = if from == mobile { to } else { from };
                let link = self.mobile.as_ref().and_then(|m| m.link);
                if link != Some(agent) {
                    return self.drop_packet(from, pkt, DropReason::MnDetached);
                }
            }
        }
        let link = self
            .topo
            .link(from, to)
            .cloned()
            .ok_or_else(|| self.fatal(from, format!("no link to {to}")))?;
        let wire = pkt.wire_size();
        let free = self
            .link_free
            .get(&(from, to))
            .copied()
            .unwrap_or(SimTime::ZERO);
        let start = free.max(self.now());
        let done = start + link.serialization(wire);
        self.link_free.insert((from, to), done);
        let mut arrival = done + link.delay;
        if !link.wireless && pkt.kind().is_registration() {
            arrival = arrival + self.processing;
        }
        self.record(from, TraceEvent::Forward, Some(&pkt), format!("to={to}"));
        self.schedule(
            arrival,
            EventKind::PacketArrival {
                node: to,
                from,
                pkt,
            },
        )
    }

    fn drop_packet(
        &mut self,
        node: HierAddress,
        pkt: Packet,
        reason: DropReason,
    ) -> Result<(), SimError> {
        let detail = format!("reason={} src={}", reason, pkt.src);
        self.record(node, TraceEvent::Drop, Some(&pkt), detail);
        Ok(())
    }

    fn forward_toward(
        &mut self,
        node: HierAddress,
        target: HierAddress,
        pkt: Packet,
    ) -> Result<(), SimError> {
        match self.topo.next_hop(node, target)? {
            Some(next) => self.transmit(node, next, pkt),
            None => Err(self.fatal(
                node,
                format!("routing loop: {} already at target", pkt.kind()),
            )),
        }
    }

    fn on_arrival(
        &mut self,
        node: HierAddress,
        from: HierAddress,
        pkt: Packet,
    ) -> Result<(), SimError> {
        let mobile = self.mobile_address();
        if mobile == Some(node) || mobile == Some(from) {
            // The wireless link may have gone away while the packet was in the air.
            let agent = if mobile == Some(node) { from } else { node };
            if self.mobile.as_ref().and_then(|m| m.link) != Some(agent) {
                return self.drop_packet(node, pkt, DropReason::MnDetached);
            }
        }
        if mobile == Some(node) {
            return self.mobile_receive(pkt);
        }
        self.process(node, pkt)
    }

    /// Handles a packet that is at `node`, either arrived or originated.
    fn process(&mut self, node: HierAddress, pkt: Packet) -> Result<(), SimError> {
        if let Some(outer) = pkt.encap_stack.last().copied() {
            if outer.outer_dst != node {
                return self.forward_toward(node, outer.outer_dst, pkt);
            }
            let for_mobile = Some(pkt.dst) == self.mobile_address();
            if pkt.kind() == PacketKind::Data && for_mobile && pkt.encap_stack.len() == 1 {
                self.age(node);
                let visitors = &self.tables[&node].visitors;
                let action = agents::fa_deliver(node, visitors, pkt)
                    .map_err(|e| self.fatal(node, e.to_string()))?;
                let (inner, drop) = match action {
                    DeliveryAction::ToMobile(p) => (p, None),
                    DeliveryAction::Drop { packet, reason } => (packet, Some(reason)),
                };
                self.log_table(node, TableAction::TunnelPop, inner.dst, Some(node), None);
                self.record(
                    node,
                    TraceEvent::TunnelPop,
                    Some(&inner),
                    format!("from={}", outer.outer_src),
                );
                return match drop {
                    Some(reason) => self.drop_packet(node, inner, reason),
                    None => self.transmit(node, inner.dst, inner),
                };
            }
            let inner = pkt
                .decapsulate(node)
                .map_err(|e| self.fatal(node, e.to_string()))?;
            self.log_table(node, TableAction::TunnelPop, inner.dst, Some(node), None);
            self.record(
                node,
                TraceEvent::TunnelPop,
                Some(&inner),
                format!("from={}", outer.outer_src),
            );
            return self.process(node, inner);
        }

        match pkt.kind() {
            PacketKind::Data => self.route_data(node, pkt),
            _ if pkt.dst == node => self.handle_control(node, pkt),
            _ => {
                let dst = pkt.dst;
                self.forward_toward(node, dst, pkt)
            }
        }
    }

    fn route_data(&mut self, node: HierAddress, pkt: Packet) -> Result<(), SimError> {
        if Some(pkt.dst) != self.mobile_address() {
            if pkt.dst == node {
                self.record(
                    node,
                    TraceEvent::Recv,
                    Some(&pkt),
                    format!("src={}", pkt.src),
                );
                return Ok(());
            }
            let dst = pkt.dst;
            return self.forward_toward(node, dst, pkt);
        }
        let mut pkt = pkt;
        if node == self.interceptor {
            self.age(node);
            let action = agents::intercept_and_tunnel(
                &self.topo,
                node,
                &self.tables[&node].bindings,
                pkt,
                self.home_agent,
                self.encap,
            )
            .map_err(|e| self.fatal(node, e.to_string()))?;
            match action {
                ForwardAction::Tunnel { packet, .. } => {
                    let coa = packet.routing_dst();
                    self.log_table(node, TableAction::TunnelPush, packet.dst, Some(coa), None);
                    self.record(
                        node,
                        TraceEvent::TunnelPush,
                        Some(&packet),
                        format!("to={coa}"),
                    );
                    return self.process(node, packet);
                }
                ForwardAction::Native { packet, .. } => pkt = packet,
            }
        }
        if node == self.home_agent {
            // Home-link delivery.
            let mobile = pkt.dst;
            return self.transmit(node, mobile, pkt);
        }
        let ha = self.home_agent;
        self.forward_toward(node, ha, pkt)
    }

    fn mobile_receive(&mut self, pkt: Packet) -> Result<(), SimError> {
        let me = self.mobile_address().expect("mobile exists");
        match pkt.body.clone() {
            Body::Data => {
                if pkt.dst != me || pkt.is_tunneled() {
                    return Err(self.fatal(me, format!("misdelivered data packet for {}", pkt.dst)));
                }
                if !self.mobile.as_ref().expect("mobile exists").reachable {
                    return self.drop_packet(me, pkt, DropReason::MnUnregistered);
                }
                let delay = self.now() - pkt.sent_at;
                let detail = format!(
                    "src={} delay={}",
                    pkt.src,
                    SimTime::from_nanos(delay.as_nanos() as u64)
                );
                self.record(me, TraceEvent::Recv, Some(&pkt), detail);
                Ok(())
            }
            Body::Advertisement(adv) => {
                self.record(
                    me,
                    TraceEvent::Recv,
                    Some(&pkt),
                    format!("from={}", adv.agent),
                );
                let m = self.mobile.as_mut().expect("mobile exists");
                if m.link != Some(adv.agent) {
                    return Ok(());
                }
                if let Some(req) = m.state.on_advertisement(&adv) {
                    self.send_request(adv.agent, req)?;
                }
                Ok(())
            }
            Body::RegReply(reply) => {
                self.record(
                    me,
                    TraceEvent::Recv,
                    Some(&pkt),
                    format!("id={} status={}", reply.id, reply.status),
                );
                let now = self.now();
                let m = self.mobile.as_mut().expect("mobile exists");
                let outcome = m.state.on_reply(&reply);
                let Some(pending) = m.pending.filter(|p| p.id == reply.id) else {
                    return Ok(());
                };
                let status = match outcome {
                    ReplyOutcome::Ignored => return Ok(()),
                    ReplyOutcome::Registered => {
                        m.reachable = true;
                        RegistrationStatus::Accepted
                    }
                    ReplyOutcome::Denied(s) => s,
                };
                m.pending = None;
                let rec = RegistrationRecord {
                    id: pending.id,
                    t_request: pending.t_request,
                    t_reply: now,
                    via: pending.via,
                    coa: pending.coa,
                    deregistration: pending.deregistration,
                    status,
                };
                let detail = format!(
                    "id={} via={} coa={} status={} registration_time={}",
                    rec.id,
                    rec.via,
                    rec.coa,
                    rec.status,
                    SimTime::from_nanos(rec.duration().as_nanos() as u64)
                );
                self.trace.registrations.push(rec);
                self.record(me, TraceEvent::RegistrationComplete, None, detail);
                Ok(())
            }
            _ => {
                self.record(me, TraceEvent::Recv, Some(&pkt), String::new());
                Ok(())
            }
        }
    }

    fn send_request(&mut self, via: HierAddress, req: RegistrationRequest) -> Result<(), SimError> {
        let me = req.home_address;
        let now = self.now();
        let m = self.mobile.as_mut().expect("mobile exists");
        m.pending = Some(PendingRegistration {
            id: req.id,
            t_request: now,
            via,
            coa: req.coa,
            deregistration: req.is_deregistration(),
        });
        let detail = format!(
            "id={} via={} coa={} lifetime={}",
            req.id,
            via,
            req.coa,
            req.requested_lifetime.as_secs_f64()
        );
        self.record(me, TraceEvent::RegistrationRequest, None, detail);
        let pkt = Packet::control(me, via, now, Body::RegRequest(req));
        self.transmit(me, via, pkt)
    }

    fn handle_control(&mut self, node: HierAddress, pkt: Packet) -> Result<(), SimError> {
        self.record(
            node,
            TraceEvent::Recv,
            Some(&pkt),
            format!("src={}", pkt.src),
        );
        match pkt.body {
            Body::Solicitation(s) => {
                if self.topo.node(node)?.kind.is_mobility_agent()
                    && Some(s.mobile) == self.mobile_address()
                {
                    self.advertise(node, false)?;
                }
                Ok(())
            }
            Body::RegRequest(req) => {
                if pkt.src == req.home_address {
                    self.relay_request(node, req)
                } else {
                    self.register(node, req, pkt.src)
                }
            }
            Body::RegReply(reply) => self.reply_at_via(node, reply),
            Body::BindingForward(bf) => {
                self.apply_binding(node, bf.home_address, bf.coa, bf.lifetime)
            }
            Body::Advertisement(_) | Body::Data => Ok(()),
        }
    }

    /// First agent to see a request from the mobile host.
    fn relay_request(
        &mut self,
        node: HierAddress,
        req: RegistrationRequest,
    ) -> Result<(), SimError> {
        let is_fa = self.topo.node(node)?.kind == NodeKind::ForeignAgent && req.coa == node;
        if is_fa {
            if let Some(denial) = agents::fa_screen(&self.policy, &req) {
                let mobile = req.home_address;
                let pkt = Packet::control(node, mobile, self.now(), Body::RegReply(denial));
                return self.transmit(node, mobile, pkt);
            }
            self.age(node);
            let registrar = self.registrar;
            let home = req.home_address;
            let coa = req.coa;
            let lifetime = req.requested_lifetime;
            self.tables
                .get_mut(&node)
                .expect("agents are wired")
                .visitors
                .admit(req.clone(), link_layer_id(home), registrar)
                .map_err(|e| self.fatal(node, e.to_string()))?;
            self.log_table(
                node,
                TableAction::VisitorPending,
                home,
                Some(coa),
                Some(lifetime),
            );
        }
        if self.registrar == node {
            return self.register(node, req, node);
        }
        let registrar = self.registrar;
        let pkt = Packet::control(node, registrar, self.now(), Body::RegRequest(req));
        self.forward_toward(node, registrar, pkt)
    }

    fn register(
        &mut self,
        node: HierAddress,
        req: RegistrationRequest,
        via: HierAddress,
    ) -> Result<(), SimError> {
        if node != self.registrar {
            return Err(self.fatal(
                node,
                format!(
                    "registration for {} reached a non-registrar",
                    req.home_address
                ),
            ));
        }
        let reply = agents::registrar_decide(&self.policy, &req);
        if reply.status == RegistrationStatus::Accepted {
            self.apply_binding(node, req.home_address, req.coa, reply.granted_lifetime)?;
        }
        let forward = (reply.status == RegistrationStatus::Accepted)
            .then_some(self.forward_target)
            .flatten()
            .map(|target| {
                (
                    target,
                    BindingForward {
                        home_address: req.home_address,
                        coa: req.coa,
                        lifetime: reply.granted_lifetime,
                    },
                )
            });
        if via == node {
            self.reply_at_via(node, reply)?;
        } else {
            let pkt = Packet::control(node, via, self.now(), Body::RegReply(reply));
            self.forward_toward(node, via, pkt)?;
        }
        if let Some((target, bf)) = forward {
            let pkt = Packet::control(node, target, self.now(), Body::BindingForward(bf));
            self.forward_toward(node, target, pkt)?;
        }
        Ok(())
    }

    /// The agent that relayed a request passes the reply to the mobile host.
    fn reply_at_via(
        &mut self,
        node: HierAddress,
        reply: RegistrationReply,
    ) -> Result<(), SimError> {
        if self.tables[&node]
            .visitors
            .is_pending(reply.home_address, reply.id)
        {
            self.age(node);
            let outcome = self
                .tables
                .get_mut(&node)
                .expect("agents are wired")
                .visitors
                .resolve(&reply)
                .map_err(|e| self.fatal(node, e.to_string()))?;
            match outcome {
                VisitorOutcome::Confirmed(entry) => {
                    let life = entry.lifetime_remaining;
                    self.log_table(
                        node,
                        TableAction::VisitorConfirm,
                        entry.home_address,
                        Some(node),
                        Some(life),
                    );
                    self.arm_timer(node, life)?;
                }
                VisitorOutcome::Removed(_) => self.log_table(
                    node,
                    TableAction::VisitorRemove,
                    reply.home_address,
                    Some(node),
                    None,
                ),
                VisitorOutcome::Rejected => self.log_table(
                    node,
                    TableAction::VisitorReject,
                    reply.home_address,
                    Some(node),
                    None,
                ),
            }
        }
        let mobile = reply.home_address;
        let pkt = Packet::control(node, mobile, self.now(), Body::RegReply(reply));
        self.transmit(node, mobile, pkt)
    }

    fn apply_binding(
        &mut self,
        node: HierAddress,
        home: HierAddress,
        coa: HierAddress,
        lifetime: Duration,
    ) -> Result<(), SimError> {
        self.age(node);
        let change = self
            .tables
            .get_mut(&node)
            .expect("binding holders are wired")
            .bindings
            .update(home, coa, lifetime);
        match change {
            BindingChange::Inserted => self.log_table(
                node,
                TableAction::BindingInsert,
                home,
                Some(coa),
                Some(lifetime),
            ),
            BindingChange::Replaced { .. } => self.log_table(
                node,
                TableAction::BindingReplace,
                home,
                Some(coa),
                Some(lifetime),
            ),
            BindingChange::Removed { old_coa } => self.log_table(
                node,
                TableAction::BindingRemove,
                home,
                Some(old_coa),
                Some(Duration::ZERO),
            ),
            BindingChange::Unchanged => {}
        }
        if !lifetime.is_zero() {
            self.arm_timer(node, lifetime)?;
        }
        Ok(())
    }

    fn arm_timer(&mut self, node: HierAddress, lifetime: Duration) -> Result<(), SimError> {
        let at = self.now() + lifetime;
        if at <= self.horizon {
            self.schedule(at, EventKind::TimerFire { node })?;
        }
        Ok(())
    }

    /// Brings the node's table lifetimes up to the current time.
    fn age(&mut self, node: HierAddress) {
        let now = self.now();
        let Some(t) = self.tables.get_mut(&node) else {
            return;
        };
        let elapsed = now.saturating_since(t.last_aged);
        t.last_aged = now;
        let bindings = t.bindings.expire(elapsed);
        let visitors = t.visitors.expire(elapsed);
        for b in bindings {
            self.log_table(
                node,
                TableAction::BindingExpire,
                b.home_address,
                Some(b.coa),
                Some(Duration::ZERO),
            );
        }
        for v in visitors {
            self.log_table(
                node,
                TableAction::VisitorExpire,
                v.home_address,
                Some(node),
                Some(Duration::ZERO),
            );
        }
    }
}

fn link_layer_id(home: HierAddress) -> String {
    format!("mn-{home}")
}
