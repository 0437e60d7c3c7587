//! Deterministic discrete-event core.
//!
//! A run is a pure function of its [`World`]. Events are ordered by
//! `(time, insertion seq)` and links are store-and-forward.

mod queue;
mod sim;
mod time;
mod trace;
mod traffic;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{RegistrationEndpoint, Strategy};
use crate::protocol::{EncapMode, DEFAULT_LIFETIME};
use crate::topology::{HierAddress, LinkParams, Topology, TopologyError};

pub use queue::{Event, EventKind, EventQueue};
pub use sim::run;
pub use time::SimTime;
pub use trace::{
    MobilityEvent, RegistrationRecord, TableAction, TraceEvent, TraceLog, TraceRecord,
    MOBILITY_HEADER, TRACE_HEADER,
};
pub use traffic::{cbr_tick, CbrSource};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("event scheduled at {requested}s while the clock is at {now}s")]
    ScheduledInPast { now: SimTime, requested: SimTime },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("t={time}s at {node}: {message}")]
    Fatal {
        time: SimTime,
        node: HierAddress,
        message: String,
    },
}

/// Why a packet never reached its consumer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    /// The wireless link to the mobile host does not exist right now.
    MnDetached,
    /// Reached the mobile host before its registration completed.
    MnUnregistered,
    /// A foreign agent de-tunneled a packet for a host it does not serve.
    NoVisitorEntry,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::MnDetached => "mn_detached",
            DropReason::MnUnregistered => "mn_unregistered",
            DropReason::NoVisitorEntry => "no_visitor_entry",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Simulation parameters. Times are seconds, bandwidth bits per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub link_delay: f64,
    pub bandwidth: u64,
    /// CBR packets per second.
    pub rate: f64,
    /// CBR payload bytes.
    pub packet_size: u32,
    pub sim_time: f64,
    pub traffic_start: f64,
    /// Defaults to `sim_time`.
    pub traffic_stop: Option<f64>,
    /// Per wired hop, registration messages only.
    pub control_processing_delay: f64,
    /// Link-layer reattachment time after a detach.
    pub attach_latency: f64,
    pub advertisement_interval: f64,
    /// Upper bound of the uniform jitter added to periodic advertisements.
    pub advertisement_jitter: f64,
    /// Lifetime requested by the mobile host and granted by registrars.
    pub lifetime: f64,
    pub encapsulation: EncapMode,
    pub registration_terminates_at: RegistrationEndpoint,
    /// Send a solicitation on attach instead of waiting for the agent to
    /// advertise.
    pub solicit_on_attach: bool,
    /// Foreign agents deny requests asking for longer than this.
    pub fa_max_lifetime: Option<f64>,
    pub registrar_accepts: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            link_delay: 0.020,
            bandwidth: 2_000_000,
            rate: 5.0,
            packet_size: 200,
            sim_time: 20.0,
            traffic_start: 0.5,
            traffic_stop: None,
            control_processing_delay: 0.075,
            attach_latency: 0.1,
            advertisement_interval: 1.0,
            advertisement_jitter: 0.0,
            lifetime: DEFAULT_LIFETIME.as_secs_f64(),
            encapsulation: EncapMode::IpInIp,
            registration_terminates_at: RegistrationEndpoint::Interceptor,
            solicit_on_attach: false,
            fa_max_lifetime: None,
            registrar_accepts: true,
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), SimError> {
    if ok {
        Ok(())
    } else {
        Err(SimError::Config(msg()))
    }
}

fn non_negative(name: &str, v: f64) -> Result<(), SimError> {
    check(v.is_finite() && v >= 0.0, || {
        format!("{name} must be a non-negative number, got {v}")
    })
}

fn positive(name: &str, v: f64) -> Result<(), SimError> {
    check(v.is_finite() && v > 0.0, || {
        format!("{name} must be positive, got {v}")
    })
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        positive("link_delay", self.link_delay)?;
        check(self.bandwidth > 0, || "bandwidth must be positive".into())?;
        positive("rate", self.rate)?;
        positive("sim_time", self.sim_time)?;
        non_negative("traffic_start", self.traffic_start)?;
        if let Some(stop) = self.traffic_stop {
            non_negative("traffic_stop", stop)?;
        }
        non_negative("control_processing_delay", self.control_processing_delay)?;
        non_negative("attach_latency", self.attach_latency)?;
        positive("advertisement_interval", self.advertisement_interval)?;
        non_negative("advertisement_jitter", self.advertisement_jitter)?;
        positive("lifetime", self.lifetime)?;
        check(self.lifetime <= u16::MAX as f64, || {
            "lifetime exceeds 65535 s".into()
        })?;
        if let Some(max) = self.fa_max_lifetime {
            non_negative("fa_max_lifetime", max)?;
        }
        Ok(())
    }

    pub fn link_params(&self) -> LinkParams {
        LinkParams {
            delay: Duration::from_secs_f64(self.link_delay),
            bandwidth: self.bandwidth,
        }
    }

    pub fn horizon(&self) -> SimTime {
        SimTime::from_secs_f64(self.sim_time)
    }

    /// The CBR source these parameters describe.
    pub fn cbr(&self, src: HierAddress, dst_home_address: HierAddress) -> CbrSource {
        CbrSource {
            src,
            dst_home_address,
            rate: self.rate,
            packet_size: self.packet_size,
            start: SimTime::from_secs_f64(self.traffic_start),
            stop: SimTime::from_secs_f64(self.traffic_stop.unwrap_or(self.sim_time)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MobileSetup {
    pub home_address: HierAddress,
    pub home_agent: HierAddress,
    /// Agent the host is attached to (and registered with) at t = 0.
    pub initial_attachment: HierAddress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HandoffStep {
    pub at: SimTime,
    pub target: HierAddress,
}

/// Everything one run needs.
#[derive(Debug, Clone)]
pub struct World {
    pub topology: Topology,
    pub params: SimParams,
    pub strategy: Strategy,
    pub mobile: Option<MobileSetup>,
    pub traffic: Vec<CbrSource>,
    pub handoffs: Vec<HandoffStep>,
    pub seed: u64,
}

#[cfg(test)]
mod tests;
