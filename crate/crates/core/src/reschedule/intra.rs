//! Loss, gain, node division and the intra-pool planner.

use log::warn;
use serde::{Deserialize, Serialize};

use super::load::Dimension;
use super::pool::{OptimalLoad, PoolState, ReplicaKey};
use super::RescheduleConfig;

/// L2 distance between a node's utilization pair and the pool target.
pub fn loss(ru_util: f64, storage_util: f64, target: &OptimalLoad) -> f64 {
    ((ru_util - target.r).powi(2) + (storage_util - target.s).powi(2)).sqrt()
}

pub fn node_loss(pool: &PoolState, node: usize, target: &OptimalLoad) -> f64 {
    let n = &pool.nodes[node];
    loss(n.util(Dimension::Ru), n.util(Dimension::Storage), target)
}

/// Largest node loss in the pool.
pub fn max_loss(pool: &PoolState, target: &OptimalLoad) -> f64 {
    (0..pool.nodes.len()).map(|n| node_loss(pool, n, target)).fold(0.0, f64::max)
}

fn loss_without(pool: &PoolState, node: usize, r: usize, target: &OptimalLoad) -> f64 {
    let n = &pool.nodes[node];
    let re = &pool.replicas[r];
    loss(
        n.ru_sum.peak_without(&re.ru) / n.ru_capacity,
        n.storage_sum.peak_without(&re.storage) / n.storage_capacity,
        target,
    )
}

fn loss_with(pool: &PoolState, node: usize, r: usize, target: &OptimalLoad) -> f64 {
    let n = &pool.nodes[node];
    let re = &pool.replicas[r];
    loss(n.ru_sum.peak_with(&re.ru) / n.ru_capacity, n.storage_sum.peak_with(&re.storage) / n.storage_capacity, target)
}

/// Reduction of `max(L(src), L(dst))` from moving replica `r` to `dst`.
pub fn migration_gain(pool: &PoolState, r: usize, dst: usize, target: &OptimalLoad) -> f64 {
    let src = pool.replicas[r].node;
    debug_assert_ne!(src, dst);
    let before = node_loss(pool, src, target).max(node_loss(pool, dst, target));
    let after = loss_without(pool, src, r, target).max(loss_with(pool, dst, r, target));
    before - after
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeDivision {
    pub low: Vec<usize>,
    pub medium: Vec<usize>,
    pub high: Vec<usize>,
}

/// Splits utilizations around `target` into low, medium and high index sets.
pub fn divide_utils(utils: &[f64], target: f64, theta: f64) -> NodeDivision {
    let mut d = NodeDivision::default();
    for (i, u) in utils.iter().enumerate() {
        if *u <= target - theta {
            d.low.push(i);
        } else if *u <= target {
            d.medium.push(i);
        } else {
            d.high.push(i);
        }
    }
    d
}

pub fn divide_nodes(pool: &PoolState, dim: Dimension, target: &OptimalLoad, theta: f64) -> NodeDivision {
    divide_utils(&pool.utils(dim), target.get(dim), theta)
}

/// Placement constraints for moving replica `r` to `dst` while balancing `dim`.
pub fn can_place(pool: &PoolState, r: usize, dst: usize, dim: Dimension, target: &OptimalLoad) -> bool {
    let re = &pool.replicas[r];
    let src = re.node;
    if src == dst || pool.hosts_sibling(dst, r) {
        return false;
    }
    let d = &pool.nodes[dst];
    if d.sum(dim).peak_with(re.load(dim)) / d.capacity(dim) > target.get(dim) {
        return false;
    }
    if d.storage_sum.peak_with(&re.storage) > d.storage_capacity {
        return false;
    }
    tenant_balance_ok(pool, re.key.tenant, src, dst)
}

fn tenant_balance_ok(pool: &PoolState, tenant: u32, src: usize, dst: usize) -> bool {
    let counts = pool.tenant_counts(tenant);
    let total: usize = counts.iter().sum();
    let nodes = pool.nodes.len();
    counts[dst] < total.div_ceil(nodes) && counts[src] > total / nodes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Migration {
    pub replica: ReplicaKey,
    #[serde(skip)]
    pub replica_index: usize,
    pub src: u32,
    pub dst: u32,
    pub gain: f64,
    pub dimension: Option<Dimension>,
    /// Bytes to copy; drives simulated migration time.
    pub bytes: f64,
}

pub type MigrationPlan = Vec<Migration>;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    r: usize,
    dst: usize,
    gain: f64,
    dst_util: f64,
}

fn better(a: &Candidate, b: &Candidate, pool: &PoolState) -> bool {
    if a.gain != b.gain {
        return a.gain > b.gain;
    }
    if a.dst_util != b.dst_util {
        return a.dst_util < b.dst_util;
    }
    let (ia, ib) = (pool.nodes[a.dst].id, pool.nodes[b.dst].id);
    if ia != ib {
        return ia < ib;
    }
    a.r < b.r
}

/// Best positive-gain move off `src` into `low`, if any.
pub fn best_move_from(
    pool: &PoolState,
    src: usize,
    low: &[usize],
    dim: Dimension,
    target: &OptimalLoad,
) -> Option<(usize, usize, f64)> {
    let mut best: Option<Candidate> = None;
    for &r in &pool.nodes[src].replicas {
        for &dst in low {
            if pool.nodes[dst].migrating || !can_place(pool, r, dst, dim, target) {
                continue;
            }
            let c =
                Candidate { r, dst, gain: migration_gain(pool, r, dst, target), dst_util: pool.nodes[dst].util(dim) };
            if best.as_ref().is_none_or(|b| better(&c, b, pool)) {
                best = Some(c);
            }
        }
    }
    best.filter(|c| c.gain > 0.0).map(|c| (c.r, c.dst, c.gain))
}

/// One planning round. Marks the nodes of every planned move as migrating;
/// the moves themselves are not applied.
pub fn intra_pool_reschedule(pool: &mut PoolState, cfg: &RescheduleConfig) -> MigrationPlan {
    let mut plan = Vec::new();
    if pool.nodes.len() < 2 {
        return plan;
    }
    let target = pool.optimal();
    for dim in Dimension::ORDER {
        let div = divide_nodes(pool, dim, &target, cfg.theta);
        let mut high = div.high;
        high.sort_by(|a, b| pool.nodes[*b].util(dim).total_cmp(&pool.nodes[*a].util(dim)));
        for src in high {
            if pool.nodes[src].migrating {
                continue;
            }
            if let Some((r, dst, gain)) = best_move_from(pool, src, &div.low, dim, &target) {
                plan.push(Migration {
                    replica: pool.replicas[r].key,
                    replica_index: r,
                    src: pool.nodes[src].id,
                    dst: pool.nodes[dst].id,
                    gain,
                    dimension: Some(dim),
                    bytes: pool.replicas[r].storage.peak(),
                });
                pool.nodes[src].migrating = true;
                pool.nodes[dst].migrating = true;
            }
        }
    }
    plan
}

fn node_index(pool: &PoolState, id: u32) -> usize {
    pool.nodes.iter().position(|n| n.id == id).expect("node in pool")
}

/// Applies every move of `plan` and clears migration flags.
pub fn execute(pool: &mut PoolState, plan: &MigrationPlan) {
    for m in plan {
        let dst = node_index(pool, m.dst);
        pool.apply_move(m.replica_index, dst);
    }
    pool.clear_migrating();
}

/// Greedy per-tenant replica count balancing. Moves are applied as they are
/// chosen.
pub fn phase1_replica_balance(pool: &mut PoolState) -> MigrationPlan {
    let mut plan = Vec::new();
    if pool.nodes.len() < 2 {
        return plan;
    }
    for tenant in pool.tenants() {
        loop {
            let counts = pool.tenant_counts(tenant);
            let hi = (0..counts.len()).max_by(|a, b| counts[*a].cmp(&counts[*b]).then(b.cmp(a))).expect("nodes");
            let lo_count = *counts.iter().min().expect("nodes");
            if counts[hi] - lo_count <= 1 {
                break;
            }
            let mut dsts: Vec<usize> = (0..counts.len()).filter(|n| counts[*n] == lo_count).collect();
            dsts.sort_by(|a, b| {
                pool.nodes[*a].util(Dimension::Ru).total_cmp(&pool.nodes[*b].util(Dimension::Ru)).then(a.cmp(b))
            });
            let mut members: Vec<usize> =
                pool.nodes[hi].replicas.iter().copied().filter(|r| pool.replicas[*r].key.tenant == tenant).collect();
            members.sort_by(|a, b| pool.replicas[*a].ru.peak().total_cmp(&pool.replicas[*b].ru.peak()).then(a.cmp(b)));
            let choice = dsts.iter().find_map(|&dst| {
                members
                    .iter()
                    .find(|&&r| {
                        let d = &pool.nodes[dst];
                        !pool.hosts_sibling(dst, r)
                            && d.storage_sum.peak_with(&pool.replicas[r].storage) <= d.storage_capacity
                    })
                    .map(|&r| (r, dst))
            });
            let Some((r, dst)) = choice else {
                warn!("tenant {tenant}: replica counts cannot be balanced further");
                break;
            };
            plan.push(Migration {
                replica: pool.replicas[r].key,
                replica_index: r,
                src: pool.nodes[hi].id,
                dst: pool.nodes[dst].id,
                gain: 0.0,
                dimension: None,
                bytes: pool.replicas[r].storage.peak(),
            });
            pool.apply_move(r, dst);
        }
    }
    plan
}

/// Audit record of one planning round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundAudit {
    pub moves: usize,
    pub max_loss_before: f64,
    pub max_loss_after: f64,
    /// Largest |(before - after) - gain| over the round's moves.
    pub gain_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeReport {
    pub phase1: MigrationPlan,
    pub rounds: Vec<RoundAudit>,
    pub migrations: MigrationPlan,
}

/// Runs replica-count balancing, then planning rounds (each executed at
/// once) until a round plans nothing or `max_rounds` is reached.
pub fn converge(pool: &mut PoolState, cfg: &RescheduleConfig, max_rounds: usize) -> ConvergeReport {
    let phase1 = phase1_replica_balance(pool);
    let mut rounds = Vec::new();
    let mut migrations = Vec::new();
    for _ in 0..max_rounds {
        let target = pool.optimal();
        let before = max_loss(pool, &target);
        let plan = intra_pool_reschedule(pool, cfg);
        if plan.is_empty() {
            pool.clear_migrating();
            break;
        }
        let pairs: Vec<(usize, usize, f64)> =
            plan.iter().map(|m| (node_index(pool, m.src), node_index(pool, m.dst), m.gain)).collect();
        let pre: Vec<f64> =
            pairs.iter().map(|(s, d, _)| node_loss(pool, *s, &target).max(node_loss(pool, *d, &target))).collect();
        execute(pool, &plan);
        let mut gain_error: f64 = 0.0;
        for ((s, d, g), p) in pairs.iter().zip(&pre) {
            let post = node_loss(pool, *s, &target).max(node_loss(pool, *d, &target));
            gain_error = gain_error.max(((p - post) - g).abs());
        }
        rounds.push(RoundAudit {
            moves: plan.len(),
            max_loss_before: before,
            max_loss_after: max_loss(pool, &target),
            gain_error,
        });
        migrations.extend(plan);
    }
    ConvergeReport { phase1, rounds, migrations }
}
