//! Experiment scenarios and the metrics drawn from their traces.

pub mod acceptance;
mod metrics;
mod plot;
mod scenario;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::engine::SimError;
use crate::topology::TopologyError;

pub use metrics::{
    improvement, run_scenario, DelaySample, Improvement, MetricsReport, StrategyMetrics,
};
pub use plot::{emit_plotdata, LOSS_GRID_STEP};
pub use scenario::{parse_strategy_set, ScenarioConfig, ScenarioId, TopologySource, SEED_ENV};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("arithmetic domain error: {0}")]
    Domain(String),
}
