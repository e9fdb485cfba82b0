//! Threshold-driven quota scaling with partition splits and a downscale
//! cooldown.

use serde::{Deserialize, Serialize};

use crate::domain::{TenantId, World};

pub const US_PER_DAY: u64 = 86_400_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutoscaleConfig {
    /// Scale up once the forecast peak exceeds this fraction of the quota.
    pub upper_ratio: f64,
    /// Scale down once the forecast peak falls below this fraction.
    pub lower_ratio: f64,
    /// Peak-to-quota ratio a new quota is sized for.
    pub target_ratio: f64,
    /// Partition quota above which a partition split is triggered.
    pub partition_upper: f64,
    /// Floor for the partition quota after a downscale.
    pub partition_lower: f64,
    pub downscale_cooldown_us: u64,
    /// Time between decisions.
    pub epoch_us: u64,
}

impl Default for AutoscaleConfig {
    fn default() -> Self {
        AutoscaleConfig {
            upper_ratio: 0.85,
            lower_ratio: 0.65,
            target_ratio: 0.65,
            partition_upper: 5000.0,
            partition_lower: 100.0,
            downscale_cooldown_us: 7 * US_PER_DAY,
            epoch_us: 3_600_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingState {
    pub tenant: TenantId,
    pub tenant_quota: f64,
    pub partitions: u32,
    pub partition_quota: f64,
    pub last_scale_us: Option<u64>,
}

impl ScalingState {
    pub fn of(world: &World, tenant: TenantId, last_scale_us: Option<u64>) -> Self {
        let t = world.tenant(tenant);
        ScalingState {
            tenant,
            tenant_quota: t.ru_quota,
            partitions: t.partition_count,
            partition_quota: t.partition_quota,
            last_scale_us,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingAction {
    None,
    ScaleUp,
    ScaleDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingDecision {
    pub tenant: TenantId,
    pub action: ScalingAction,
    pub new_tenant_quota: f64,
    pub new_partition_quota: f64,
    pub new_partitions: u32,
    pub split: bool,
}

/// Chooses the next quota for a forecast peak `u_max` observed at `now_us`.
pub fn decide(state: &ScalingState, u_max: f64, now_us: u64, cfg: &AutoscaleConfig) -> ScalingDecision {
    let keep = ScalingDecision {
        tenant: state.tenant,
        action: ScalingAction::None,
        new_tenant_quota: state.tenant_quota,
        new_partition_quota: state.partition_quota,
        new_partitions: state.partitions,
        split: false,
    };
    let n = f64::from(state.partitions);
    if u_max > cfg.upper_ratio * state.tenant_quota {
        let qt = u_max / cfg.target_ratio;
        let mut qp = qt / n;
        let mut parts = state.partitions;
        let split = qp > cfg.partition_upper;
        if split {
            parts *= 2;
            qp *= 0.5;
        }
        return ScalingDecision {
            action: ScalingAction::ScaleUp,
            new_tenant_quota: qt,
            new_partition_quota: qp,
            new_partitions: parts,
            split,
            ..keep
        };
    }
    let cooled = state.last_scale_us.is_none_or(|t| now_us.saturating_sub(t) >= cfg.downscale_cooldown_us);
    if u_max < cfg.lower_ratio * state.tenant_quota && cooled {
        let qt = u_max / cfg.target_ratio;
        return ScalingDecision {
            action: ScalingAction::ScaleDown,
            new_tenant_quota: qt,
            new_partition_quota: (qt / n).max(cfg.partition_lower),
            ..keep
        };
    }
    keep
}

/// Applies `d` to the world: optional split first, then the new quotas on
/// the tenant and every partition. Returns whether anything changed.
pub fn apply(world: &mut World, d: &ScalingDecision) -> bool {
    if d.action == ScalingAction::None {
        return false;
    }
    if d.split {
        world.split_partitions(d.tenant);
    }
    world.set_quotas(d.tenant, d.new_tenant_quota, d.new_partition_quota);
    true
}
