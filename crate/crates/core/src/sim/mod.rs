//! Deterministic discrete-event simulator.
//!
//! A run is fully described by a [`ScenarioConfig`](crate::scenario::ScenarioConfig):
//! the same scenario and seed always produce identical outputs.

mod engine;
mod events;
mod metrics;
mod service;
mod workload;

use thiserror::Error;

pub use engine::{
    DecisionRecord, LittleCheck, MigrationRecord, NodeSummary, RescheduleTickRecord, RunOutput, RunSummary,
    TenantSummary,
};
pub use events::EventQueue;
pub use metrics::{percentile, Counters, MetricRow, MetricsSink, Terminal};
pub use service::ServiceModel;
pub use workload::{
    gen_arrivals, stream_seed, ArrivalGen, ArrivalProcess, KeyPopularity, KeySampler, ValueSize, WorkloadProfile,
};

use crate::domain::DomainError;
use crate::scenario::{ScenarioConfig, ScenarioError};
use crate::wfq::WfqError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("node queue: {0}")]
    Wfq(#[from] WfqError),
    #[error("event queue drained with {live} requests still in flight at t={at_us} us")]
    Stalled { live: u64, at_us: u64 },
    #[error("request accounting mismatch: {}", .0.join("; "))]
    Conservation(Vec<String>),
}

impl SimError {
    /// True for problems in the input rather than in the run itself.
    pub fn is_config(&self) -> bool {
        matches!(self, SimError::Scenario(_) | SimError::Domain(_) | SimError::Config(_))
    }
}

/// Runs `cfg` to completion.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    engine::Simulation::new(cfg)?.run()
}
