//! Mobile IP messages and tunnel encapsulation. Also the binding table kept
//! by whichever node tunnels, and the visitor list kept by foreign agents.
//!
//! Messages are structured values. Their cost on the wire is charged through
//! a fixed control payload size plus whatever tunnel headers they carry.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::SimTime;
use crate::topology::HierAddress;

/// Bytes of the base IP header every packet carries.
pub const BASE_HEADER_BYTES: u32 = 20;
/// Payload bytes charged for every control message.
pub const CONTROL_PAYLOAD_BYTES: u32 = 48;
/// Deepest tunnel nesting allowed.
pub const MAX_ENCAP_DEPTH: usize = 2;
/// Binding and visitor lifetime used when a scenario does not set one.
pub const DEFAULT_LIFETIME: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("tunnel stack overflow: packet already carries {depth} headers")]
    TunnelOverflow { depth: usize },
    #[error("decapsulation at {at} of a packet with no tunnel header")]
    EmptyStack { at: HierAddress },
    #[error("misdelivery: tunnel for {expected} decapsulated at {at}")]
    Misdelivery {
        expected: HierAddress,
        at: HierAddress,
    },
    #[error("registration {id} from {home_address} is already pending")]
    DuplicateRegistration { home_address: HierAddress, id: u32 },
    #[error("no pending registration {id} for {home_address}")]
    UnknownRegistration { home_address: HierAddress, id: u32 },
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "snake_case")]
pub enum EncapMode {
    #[default]
    IpInIp,
    Minimal,
    Gre,
}

impl EncapMode {
    pub const ALL: [EncapMode; 3] = [EncapMode::IpInIp, EncapMode::Minimal, EncapMode::Gre];

    /// Header bytes added by one level of this encapsulation.
    pub const fn overhead(self) -> u32 {
        match self {
            EncapMode::IpInIp => 20,
            EncapMode::Minimal => 12,
            EncapMode::Gre => 24,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncapsulationHeader {
    pub mode: EncapMode,
    pub outer_src: HierAddress,
    pub outer_dst: HierAddress,
}

impl EncapsulationHeader {
    pub const fn overhead(&self) -> u32 {
        self.mode.overhead()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentAdvertisement {
    pub agent: HierAddress,
    pub offered_coa: HierAddress,
    pub is_home_agent: bool,
    pub is_foreign_agent: bool,
    pub lifetime: Duration,
    pub sequence: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentSolicitation {
    pub mobile: HierAddress,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistrationRequest {
    pub home_address: HierAddress,
    pub home_agent: HierAddress,
    pub coa: HierAddress,
    /// Zero means deregistration.
    pub requested_lifetime: Duration,
    pub id: u32,
}

impl RegistrationRequest {
    pub fn is_deregistration(&self) -> bool {
        self.requested_lifetime.is_zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RegistrationStatus {
    Accepted,
    DeniedByFa,
    DeniedByHa,
}

impl fmt::Display for RegistrationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegistrationStatus::Accepted => "accepted",
            RegistrationStatus::DeniedByFa => "denied_by_fa",
            RegistrationStatus::DeniedByHa => "denied_by_ha",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistrationReply {
    pub id: u32,
    pub home_address: HierAddress,
    pub coa: HierAddress,
    pub granted_lifetime: Duration,
    pub status: RegistrationStatus,
}

impl RegistrationReply {
    pub fn accepted(req: &RegistrationRequest, granted: Duration) -> Self {
        Self {
            id: req.id,
            home_address: req.home_address,
            coa: req.coa,
            granted_lifetime: granted.min(req.requested_lifetime),
            status: RegistrationStatus::Accepted,
        }
    }

    pub fn denied(req: &RegistrationRequest, status: RegistrationStatus) -> Self {
        debug_assert_ne!(status, RegistrationStatus::Accepted);
        Self {
            id: req.id,
            home_address: req.home_address,
            coa: req.coa,
            granted_lifetime: Duration::ZERO,
            status,
        }
    }
}

/// Binding state pushed between the home agent and an interception node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BindingForward {
    pub home_address: HierAddress,
    pub coa: HierAddress,
    pub lifetime: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PacketKind {
    Data,
    Advertisement,
    Solicitation,
    RegRequest,
    RegReply,
    BindingForward,
}

impl PacketKind {
    pub fn is_registration(self) -> bool {
        matches!(
            self,
            PacketKind::RegRequest | PacketKind::RegReply | PacketKind::BindingForward
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::Data => "data",
            PacketKind::Advertisement => "advertisement",
            PacketKind::Solicitation => "solicitation",
            PacketKind::RegRequest => "reg_request",
            PacketKind::RegReply => "reg_reply",
            PacketKind::BindingForward => "binding_forward",
        }
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Data,
    Advertisement(AgentAdvertisement),
    Solicitation(AgentSolicitation),
    RegRequest(RegistrationRequest),
    RegReply(RegistrationReply),
    BindingForward(BindingForward),
}

impl Body {
    pub fn kind(&self) -> PacketKind {
        match self {
            Body::Data => PacketKind::Data,
            Body::Advertisement(_) => PacketKind::Advertisement,
            Body::Solicitation(_) => PacketKind::Solicitation,
            Body::RegRequest(_) => PacketKind::RegRequest,
            Body::RegReply(_) => PacketKind::RegReply,
            Body::BindingForward(_) => PacketKind::BindingForward,
        }
    }
}

/// A simulated datagram. `dst` is the recipient's home address when the
/// recipient is mobile; tunnels are tracked in `encap_stack`, outermost last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub src: HierAddress,
    pub dst: HierAddress,
    pub payload_size: u32,
    pub seq: u64,
    pub sent_at: SimTime,
    pub encap_stack: Vec<EncapsulationHeader>,
    pub body: Body,
}

impl Packet {
    pub fn data(
        src: HierAddress,
        dst: HierAddress,
        payload_size: u32,
        seq: u64,
        sent_at: SimTime,
    ) -> Self {
        Self {
            src,
            dst,
            payload_size,
            seq,
            sent_at,
            encap_stack: Vec::new(),
            body: Body::Data,
        }
    }

    pub fn control(src: HierAddress, dst: HierAddress, sent_at: SimTime, body: Body) -> Self {
        Self {
            src,
            dst,
            payload_size: CONTROL_PAYLOAD_BYTES,
            seq: 0,
            sent_at,
            encap_stack: Vec::new(),
            body,
        }
    }

    pub fn kind(&self) -> PacketKind {
        self.body.kind()
    }

    pub fn wire_size(&self) -> u32 {
        self.payload_size
            + BASE_HEADER_BYTES
            + self.encap_stack.iter().map(|h| h.overhead()).sum::<u32>()
    }

    pub fn is_tunneled(&self) -> bool {
        !self.encap_stack.is_empty()
    }

    /// Where the network should carry the packet next: the outermost tunnel
    /// endpoint, or the inner destination.
    pub fn routing_dst(&self) -> HierAddress {
        self.encap_stack.last().map_or(self.dst, |h| h.outer_dst)
    }

    pub fn encapsulate(
        mut self,
        mode: EncapMode,
        tunnel_src: HierAddress,
        tunnel_dst: HierAddress,
    ) -> Result<Packet, ProtocolError> {
        if self.encap_stack.len() >= MAX_ENCAP_DEPTH {
            return Err(ProtocolError::TunnelOverflow {
                depth: self.encap_stack.len(),
            });
        }
        self.encap_stack.push(EncapsulationHeader {
            mode,
            outer_src: tunnel_src,
            outer_dst: tunnel_dst,
        });
        Ok(self)
    }

    /// Pops the outermost header at the tunnel endpoint `at`.
    pub fn decapsulate(mut self, at: HierAddress) -> Result<Packet, ProtocolError> {
        match self.encap_stack.last() {
            None => Err(ProtocolError::EmptyStack { at }),
            Some(h) if h.outer_dst != at => Err(ProtocolError::Misdelivery {
                expected: h.outer_dst,
                at,
            }),
            Some(_) => {
                self.encap_stack.pop();
                Ok(self)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MobilityBinding {
    pub home_address: HierAddress,
    pub coa: HierAddress,
    pub lifetime_remaining: Duration,
}

/// Outcome of a binding-table upsert.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingChange {
    Inserted,
    Replaced {
        old_coa: HierAddress,
    },
    Removed {
        old_coa: HierAddress,
    },
    /// Deregistration of a home address that had no binding.
    Unchanged,
}

/// Home address to care-of address mapping with lifetimes. At most one
/// binding per home address.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BindingTable {
    entries: BTreeMap<HierAddress, MobilityBinding>,
}

impl BindingTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Upsert; a zero lifetime deregisters.
    pub fn update(
        &mut self,
        home_address: HierAddress,
        coa: HierAddress,
        lifetime: Duration,
    ) -> BindingChange {
        if lifetime.is_zero() {
            return match self.entries.remove(&home_address) {
                Some(old) => BindingChange::Removed { old_coa: old.coa },
                None => BindingChange::Unchanged,
            };
        }
        let old = self.entries.insert(
            home_address,
            MobilityBinding {
                home_address,
                coa,
                lifetime_remaining: lifetime,
            },
        );
        match old {
            Some(o) => BindingChange::Replaced { old_coa: o.coa },
            None => BindingChange::Inserted,
        }
    }

    /// Ages every entry by `elapsed` and returns the ones that ran out.
    pub fn expire(&mut self, elapsed: Duration) -> Vec<MobilityBinding> {
        if elapsed.is_zero() {
            return Vec::new();
        }
        let mut expired = Vec::new();
        self.entries.retain(|_, b| {
            if b.lifetime_remaining <= elapsed {
                expired.push(b.clone());
                false
            } else {
                b.lifetime_remaining -= elapsed;
                true
            }
        });
        expired
    }

    pub fn get(&self, home_address: HierAddress) -> Option<&MobilityBinding> {
        self.entries.get(&home_address)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MobilityBinding> {
        self.entries.values()
    }

    pub fn min_lifetime(&self) -> Option<Duration> {
        self.entries.values().map(|b| b.lifetime_remaining).min()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitorEntry {
    pub home_address: HierAddress,
    pub home_agent: HierAddress,
    pub link_layer_id: String,
    pub lifetime_remaining: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct PendingVisit {
    request: RegistrationRequest,
    link_layer_id: String,
}

/// What a foreign agent does with a request it has admitted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayDecision {
    pub request: RegistrationRequest,
    pub relay_to: HierAddress,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VisitorOutcome {
    Confirmed(VisitorEntry),
    Removed(Option<VisitorEntry>),
    Rejected,
}

/// A foreign agent's registry of visiting mobile hosts plus the requests it
/// is still waiting to hear back about.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VisitorList {
    confirmed: BTreeMap<HierAddress, VisitorEntry>,
    pending: BTreeMap<(HierAddress, u32), PendingVisit>,
}

impl VisitorList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records the request as pending and relays it toward `relay_to`.
    pub fn admit(
        &mut self,
        request: RegistrationRequest,
        link_layer_id: impl Into<String>,
        relay_to: HierAddress,
    ) -> Result<RelayDecision, ProtocolError> {
        let key = (request.home_address, request.id);
        if self.pending.contains_key(&key) {
            return Err(ProtocolError::DuplicateRegistration {
                home_address: request.home_address,
                id: request.id,
            });
        }
        self.pending.insert(
            key,
            PendingVisit {
                request: request.clone(),
                link_layer_id: link_layer_id.into(),
            },
        );
        Ok(RelayDecision { request, relay_to })
    }

    /// Applies a reply to its pending request.
    pub fn resolve(&mut self, reply: &RegistrationReply) -> Result<VisitorOutcome, ProtocolError> {
        let pending = self.pending.remove(&(reply.home_address, reply.id)).ok_or(
            ProtocolError::UnknownRegistration {
                home_address: reply.home_address,
                id: reply.id,
            },
        )?;
        if reply.status != RegistrationStatus::Accepted {
            return Ok(VisitorOutcome::Rejected);
        }
        if reply.granted_lifetime.is_zero() {
            return Ok(VisitorOutcome::Removed(
                self.confirmed.remove(&reply.home_address),
            ));
        }
        let entry = VisitorEntry {
            home_address: pending.request.home_address,
            home_agent: pending.request.home_agent,
            link_layer_id: pending.link_layer_id,
            lifetime_remaining: reply.granted_lifetime,
        };
        self.confirmed.insert(entry.home_address, entry.clone());
        Ok(VisitorOutcome::Confirmed(entry))
    }

    /// Installs a confirmed entry directly, as if a registration had completed.
    pub fn insert_confirmed(&mut self, entry: VisitorEntry) {
        self.confirmed.insert(entry.home_address, entry);
    }

    pub fn expire(&mut self, elapsed: Duration) -> Vec<VisitorEntry> {
        if elapsed.is_zero() {
            return Vec::new();
        }
        let mut expired = Vec::new();
        self.confirmed.retain(|_, v| {
            if v.lifetime_remaining <= elapsed {
                expired.push(v.clone());
                false
            } else {
                v.lifetime_remaining -= elapsed;
                true
            }
        });
        expired
    }

    pub fn get(&self, home_address: HierAddress) -> Option<&VisitorEntry> {
        self.confirmed.get(&home_address)
    }

    pub fn is_pending(&self, home_address: HierAddress, id: u32) -> bool {
        self.pending.contains_key(&(home_address, id))
    }

    pub fn len(&self) -> usize {
        self.confirmed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.confirmed.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &VisitorEntry> {
        self.confirmed.values()
    }

    pub fn min_lifetime(&self) -> Option<Duration> {
        self.confirmed.values().map(|v| v.lifetime_remaining).min()
    }
}
