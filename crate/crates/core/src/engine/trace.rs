use std::fmt;
use std::io;
use std::time::Duration;

use crate::protocol::{PacketKind, RegistrationStatus};
use crate::topology::HierAddress;

use super::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TraceEvent {
    /// A packet originated at this node.
    Send,
    /// A packet left this node on a link.
    Forward,
    /// A packet reached its final consumer.
    Recv,
    Drop,
    TunnelPush,
    TunnelPop,
    AdvertisementTick,
    Attach,
    Detach,
    RegistrationRequest,
    RegistrationComplete,
    TableUpdate,
    Horizon,
}

impl TraceEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceEvent::Send => "send",
            TraceEvent::Forward => "forward",
            TraceEvent::Recv => "recv",
            TraceEvent::Drop => "drop",
            TraceEvent::TunnelPush => "tunnel_push",
            TraceEvent::TunnelPop => "tunnel_pop",
            TraceEvent::AdvertisementTick => "adv_tick",
            TraceEvent::Attach => "attach",
            TraceEvent::Detach => "detach",
            TraceEvent::RegistrationRequest => "reg_request",
            TraceEvent::RegistrationComplete => "reg_complete",
            TraceEvent::TableUpdate => "table_update",
            TraceEvent::Horizon => "horizon",
        }
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: SimTime,
    pub node: HierAddress,
    pub event: TraceEvent,
    pub seq: Option<u64>,
    pub pkt_kind: Option<PacketKind>,
    pub wire_bytes: Option<u32>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TableAction {
    BindingInsert,
    BindingReplace,
    BindingRemove,
    BindingExpire,
    VisitorPending,
    VisitorConfirm,
    VisitorRemove,
    VisitorReject,
    VisitorExpire,
    TunnelPush,
    TunnelPop,
}

impl TableAction {
    pub fn as_str(self) -> &'static str {
        match self {
            TableAction::BindingInsert => "binding_insert",
            TableAction::BindingReplace => "binding_replace",
            TableAction::BindingRemove => "binding_remove",
            TableAction::BindingExpire => "binding_expire",
            TableAction::VisitorPending => "visitor_pending",
            TableAction::VisitorConfirm => "visitor_confirm",
            TableAction::VisitorRemove => "visitor_remove",
            TableAction::VisitorReject => "visitor_reject",
            TableAction::VisitorExpire => "visitor_expire",
            TableAction::TunnelPush => "tunnel_push",
            TableAction::TunnelPop => "tunnel_pop",
        }
    }
}

/// One mobility-state mutation or tunnel operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MobilityEvent {
    pub time: SimTime,
    pub node: HierAddress,
    pub action: TableAction,
    pub home_address: HierAddress,
    pub coa: Option<HierAddress>,
    pub lifetime: Option<Duration>,
}

/// A completed (or denied) registration as seen by the mobile host.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistrationRecord {
    pub id: u32,
    pub t_request: SimTime,
    pub t_reply: SimTime,
    pub via: HierAddress,
    pub coa: HierAddress,
    pub deregistration: bool,
    pub status: RegistrationStatus,
}

impl RegistrationRecord {
    pub fn duration(&self) -> Duration {
        self.t_reply - self.t_request
    }
}

/// Everything a run produced, in execution order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceLog {
    pub records: Vec<TraceRecord>,
    pub mobility: Vec<MobilityEvent>,
    pub registrations: Vec<RegistrationRecord>,
    /// Data packets still inside the network when the horizon was reached.
    pub data_in_flight: u64,
}

pub const TRACE_HEADER: [&str; 7] = [
    "time_s",
    "node",
    "event_kind",
    "seq",
    "pkt_kind",
    "wire_bytes",
    "detail",
];

pub const MOBILITY_HEADER: [&str; 6] = [
    "time_s",
    "node",
    "action",
    "home_address",
    "coa",
    "lifetime",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TraceLog {
    pub fn write_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(TRACE_HEADER)?;
        for r in &self.records {
            out.write_record([
                r.time.to_string(),
                r.node.to_string(),
                r.event.to_string(),
                opt(r.seq),
                opt(r.pkt_kind),
                opt(r.wire_bytes),
                r.detail.clone(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_mobility_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(MOBILITY_HEADER)?;
        for e in &self.mobility {
            out.write_record([
                e.time.to_string(),
                e.node.to_string(),
                e.action.as_str().to_string(),
                e.home_address.to_string(),
                opt(e.coa),
                e.lifetime
                    .map(|l| SimTime::from_nanos(l.as_nanos() as u64).to_string())
                    .unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn count(&self, event: TraceEvent, kind: PacketKind) -> usize {
        self.records
            .iter()
            .filter(|r| r.event == event && r.pkt_kind == Some(kind))
            .count()
    }
}
