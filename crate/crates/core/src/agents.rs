//! Mobility-agent behavior and the mobile host's registration state machine.
//!
//! These are pure decision functions over the protocol tables; the engine
//! owns the state and calls them from its event loop.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::engine::{DropReason, SimTime};
use crate::protocol::{
    AgentAdvertisement, BindingTable, EncapMode, Packet, ProtocolError, RegistrationReply,
    RegistrationRequest, RegistrationStatus, VisitorList,
};
use crate::topology::{HierAddress, Topology, TopologyError};

/// Where tunneling toward the care-of address starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Classic triangle routing: the home agent tunnels.
    #[serde(rename = "original")]
    OriginalMip,
    /// The router one level above the home agent tunnels.
    #[serde(rename = "onelevel")]
    OneLevelUp,
    /// The router two levels above the home agent (the surrogate home agent)
    /// tunnels.
    #[serde(rename = "twolevel")]
    TwoLevelUp,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::OriginalMip,
        Strategy::OneLevelUp,
        Strategy::TwoLevelUp,
    ];

    pub const fn levels_above(self) -> u32 {
        match self {
            Strategy::OriginalMip => 0,
            Strategy::OneLevelUp => 1,
            Strategy::TwoLevelUp => 2,
        }
    }

    /// Short name used on the command line and in file names.
    pub const fn name(self) -> &'static str {
        match self {
            Strategy::OriginalMip => "original",
            Strategy::OneLevelUp => "onelevel",
            Strategy::TwoLevelUp => "twolevel",
        }
    }

    pub fn interception_node(
        self,
        topo: &Topology,
        ha: HierAddress,
    ) -> Result<HierAddress, TopologyError> {
        topo.ancestor_above(ha, self.levels_above())
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                format!("unknown strategy `{s}` (expected original, onelevel or twolevel)")
            })
    }
}

/// Which node answers registrations under the interception strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegistrationEndpoint {
    /// The interception node replies and pushes the binding to the home
    /// agent in the background.
    #[default]
    Interceptor,
    /// The home agent replies and then pushes the binding up to the
    /// interception node.
    HomeAgent,
}

/// Node that processes registrations for `ha`'s mobile hosts.
pub fn registrar(
    topo: &Topology,
    strategy: Strategy,
    endpoint: RegistrationEndpoint,
    ha: HierAddress,
) -> Result<HierAddress, TopologyError> {
    match endpoint {
        RegistrationEndpoint::Interceptor => strategy.interception_node(topo, ha),
        RegistrationEndpoint::HomeAgent => Ok(ha),
    }
}

/// Node the registrar pushes the accepted binding to, if any.
pub fn binding_forward_target(
    topo: &Topology,
    strategy: Strategy,
    endpoint: RegistrationEndpoint,
    ha: HierAddress,
) -> Result<Option<HierAddress>, TopologyError> {
    let interceptor = strategy.interception_node(topo, ha)?;
    let registrar = registrar(topo, strategy, endpoint, ha)?;
    Ok(if registrar != ha {
        Some(ha)
    } else if interceptor != ha {
        Some(interceptor)
    } else {
        None
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    AtHome,
    Foreign(HierAddress),
    Detached,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MnState {
    pub home_address: HierAddress,
    pub home_agent: HierAddress,
    pub location: Location,
    pub current_coa: Option<HierAddress>,
    pub pending_registration: Option<u32>,
    next_registration_id: u32,
    lifetime: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplyOutcome {
    /// Not the reply we are waiting for.
    Ignored,
    Registered,
    Denied(RegistrationStatus),
}

impl MnState {
    pub fn at_home(home_address: HierAddress, home_agent: HierAddress, lifetime: Duration) -> Self {
        Self {
            home_address,
            home_agent,
            location: Location::AtHome,
            current_coa: None,
            pending_registration: None,
            next_registration_id: 1,
            lifetime,
        }
    }

    /// State after a registration at `coa` completed before the run began.
    pub fn registered_at(mut self, coa: HierAddress) -> Self {
        if coa != self.home_agent {
            self.location = Location::Foreign(coa);
            self.current_coa = Some(coa);
        }
        self
    }

    /// Reacts to an advertisement heard on the current link. A new foreign
    /// network triggers registration; hearing the home agent while away
    /// triggers deregistration.
    pub fn on_advertisement(&mut self, adv: &AgentAdvertisement) -> Option<RegistrationRequest> {
        if self.pending_registration.is_some() {
            return None;
        }
        let (coa, lifetime) = if adv.is_home_agent && adv.agent == self.home_agent {
            if self.location == Location::AtHome {
                return None;
            }
            (self.home_agent, Duration::ZERO)
        } else if adv.is_foreign_agent {
            if self.location == Location::Foreign(adv.offered_coa) {
                return None;
            }
            (adv.offered_coa, self.lifetime.min(adv.lifetime))
        } else {
            return None;
        };
        let id = self.next_registration_id;
        self.next_registration_id += 1;
        self.pending_registration = Some(id);
        Some(RegistrationRequest {
            home_address: self.home_address,
            home_agent: self.home_agent,
            coa,
            requested_lifetime: lifetime,
            id,
        })
    }

    pub fn on_reply(&mut self, reply: &RegistrationReply) -> ReplyOutcome {
        if self.pending_registration != Some(reply.id) || reply.home_address != self.home_address {
            return ReplyOutcome::Ignored;
        }
        self.pending_registration = None;
        match reply.status {
            RegistrationStatus::Accepted => {
                if reply.coa == self.home_agent {
                    self.location = Location::AtHome;
                    self.current_coa = None;
                } else {
                    self.location = Location::Foreign(reply.coa);
                    self.current_coa = Some(reply.coa);
                }
                ReplyOutcome::Registered
            }
            denied => ReplyOutcome::Denied(denied),
        }
    }

    /// Link-layer loss of the current attachment.
    pub fn detach(&mut self) {
        self.location = Location::Detached;
        self.current_coa = None;
        self.pending_registration = None;
    }
}

/// Control-plane route of one registration and its background binding push.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Itinerary {
    pub request: Vec<HierAddress>,
    pub reply: Vec<HierAddress>,
    pub binding_forward: Option<Vec<HierAddress>>,
}

impl Itinerary {
    /// Edges crossed by request plus reply, wireless hop included.
    pub fn round_trip_hops(&self) -> usize {
        self.request.len() - 1 + self.reply.len() - 1
    }

    /// As `round_trip_hops`, without the two wireless crossings.
    pub fn wired_round_trip_hops(&self) -> usize {
        self.round_trip_hops() - 2
    }
}

/// Control-plane itinerary for a mobile host registering through `via`.
pub fn registration_flow(
    topo: &Topology,
    strategy: Strategy,
    endpoint: RegistrationEndpoint,
    mobile: HierAddress,
    ha: HierAddress,
    via: HierAddress,
) -> Result<Itinerary, TopologyError> {
    let reg = registrar(topo, strategy, endpoint, ha)?;
    let mut request = vec![mobile];
    request.extend(topo.shortest_path(via, reg)?);
    let mut reply = request.clone();
    reply.reverse();
    let binding_forward = binding_forward_target(topo, strategy, endpoint, ha)?
        .map(|target| topo.shortest_path(reg, target))
        .transpose()?;
    Ok(Itinerary {
        request,
        reply,
        binding_forward,
    })
}

/// What an interception node does with a data packet for a mobile host.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ForwardAction {
    Tunnel {
        packet: Packet,
        path: Vec<HierAddress>,
    },
    Native {
        packet: Packet,
        toward: HierAddress,
    },
}

/// Tunnels toward the bound care-of address, or passes the packet on
/// natively toward the home network when no binding exists.
pub fn intercept_and_tunnel(
    topo: &Topology,
    node: HierAddress,
    bindings: &BindingTable,
    pkt: Packet,
    home_agent: HierAddress,
    mode: EncapMode,
) -> Result<ForwardAction, ProtocolError> {
    match bindings.get(pkt.dst) {
        Some(b) => {
            let coa = b.coa;
            let packet = pkt.encapsulate(mode, node, coa)?;
            let path = topo
                .shortest_path(node, coa)
                .expect("bound care-of address is in the topology");
            Ok(ForwardAction::Tunnel { packet, path })
        }
        None => Ok(ForwardAction::Native {
            packet: pkt,
            toward: home_agent,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DeliveryAction {
    ToMobile(Packet),
    Drop { packet: Packet, reason: DropReason },
}

/// Foreign-agent handling of a tunneled packet addressed to it.
pub fn fa_deliver(
    fa: HierAddress,
    visitors: &VisitorList,
    pkt: Packet,
) -> Result<DeliveryAction, ProtocolError> {
    let inner = pkt.decapsulate(fa)?;
    if visitors.get(inner.dst).is_some() {
        Ok(DeliveryAction::ToMobile(inner))
    } else {
        Ok(DeliveryAction::Drop {
            packet: inner,
            reason: DropReason::NoVisitorEntry,
        })
    }
}

/// Admission policy knobs for agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentPolicy {
    /// Foreign agents deny requests asking for more than this.
    pub fa_max_lifetime: Option<Duration>,
    /// Registrars accept registrations at all.
    pub accept_registrations: bool,
    /// Registrars grant at most this lifetime.
    pub max_lifetime: Duration,
}

impl Default for AgentPolicy {
    fn default() -> Self {
        Self {
            fa_max_lifetime: None,
            accept_registrations: true,
            max_lifetime: Duration::from_secs(u16::MAX as u64),
        }
    }
}

/// Foreign-agent screening; `Some` carries the denial to send back.
pub fn fa_screen(policy: &AgentPolicy, req: &RegistrationRequest) -> Option<RegistrationReply> {
    match policy.fa_max_lifetime {
        Some(max) if req.requested_lifetime > max => Some(RegistrationReply::denied(
            req,
            RegistrationStatus::DeniedByFa,
        )),
        _ => None,
    }
}

pub fn registrar_decide(policy: &AgentPolicy, req: &RegistrationRequest) -> RegistrationReply {
    if policy.accept_registrations {
        RegistrationReply::accepted(req, policy.max_lifetime)
    } else {
        RegistrationReply::denied(req, RegistrationStatus::DeniedByHa)
    }
}

/// The two mobility events a scripted handoff expands to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandoffPlan {
    pub from: HierAddress,
    pub to: HierAddress,
    pub detach_at: SimTime,
    pub attach_at: SimTime,
}

pub fn plan_handoff(
    topo: &Topology,
    from: HierAddress,
    to: HierAddress,
    at: SimTime,
    attach_latency: Duration,
    horizon: SimTime,
) -> Result<HandoffPlan, String> {
    if from == to {
        return Err(format!("handoff at {at}s from {from} to itself"));
    }
    match topo.node(to) {
        Ok(n) if n.kind.is_mobility_agent() => {}
        Ok(_) => return Err(format!("handoff target {to} is not a mobility agent")),
        Err(_) => return Err(format!("handoff target {to} is not in the topology")),
    }
    if at > horizon {
        return Err(format!("handoff at {at}s is past the horizon {horizon}s"));
    }
    Ok(HandoffPlan {
        from,
        to,
        detach_at: at,
        attach_at: at + attach_latency,
    })
}
