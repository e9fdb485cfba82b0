//! Multi-resource replica rescheduling within and across resource pools.

mod inter;
mod intra;
mod load;
mod pool;

use serde::{Deserialize, Serialize};

pub use inter::{inter_pool_reschedule, nodes_to_move, InterPoolOutcome, NodeReassignment};
pub use intra::{
    best_move_from, can_place, converge, divide_nodes, divide_utils, execute, intra_pool_reschedule, loss, max_loss,
    migration_gain, node_loss, phase1_replica_balance, ConvergeReport, Migration, MigrationPlan, NodeDivision,
    RoundAudit,
};
pub use load::{Dimension, LoadVector, SLOTS};
pub use pool::{
    mean_std, NodeRecord, NodeState, OptimalLoad, PoolError, PoolFile, PoolGenerator, PoolSnapshot, PoolState,
    PoolStats, ReplicaKey, ReplicaRecord, ReplicaState,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RescheduleConfig {
    /// Half-width of the medium band around the pool target.
    pub theta: f64,
    /// RU utilization gap between pools that triggers node reassignment.
    pub inter_pool_trigger: f64,
    pub tick_us: u64,
    /// Bytes per second copied by a migration.
    pub migration_bandwidth: f64,
    /// Weight of write RU in a replica's RU load.
    pub write_weight: f64,
    /// Planning rounds per offline convergence run.
    pub max_rounds: usize,
}

impl Default for RescheduleConfig {
    fn default() -> Self {
        RescheduleConfig {
            theta: 0.05,
            inter_pool_trigger: 0.15,
            tick_us: 600_000_000,
            migration_bandwidth: 100e6,
            write_weight: 1.5,
            max_rounds: 10_000,
        }
    }
}

/// RU load attributed to a replica from its observed traffic.
pub fn replica_ru_load(read_ru: f64, hit_ratio: f64, write_ru: f64, cfg: &RescheduleConfig) -> f64 {
    read_ru * (1.0 - hit_ratio) + cfg.write_weight * write_ru
}
