//! Discrete-event simulator for hierarchical Mobile IP with configurable
//! tunnel interception points.

pub mod agents;
pub mod engine;
pub mod harness;
pub mod protocol;
pub mod topology;

pub use agents::{RegistrationEndpoint, Strategy};
pub use engine::{run, SimError, SimParams, SimTime, TraceLog, World};
pub use topology::{HierAddress, Topology};
