//! Moving whole nodes from an underused pool to an overused one.

use log::warn;
use serde::{Deserialize, Serialize};

use super::intra::{converge, ConvergeReport, Migration, MigrationPlan};
use super::load::Dimension;
use super::pool::PoolState;
use super::RescheduleConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReassignment {
    pub node: u32,
    pub from_pool: String,
    pub to_pool: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterPoolOutcome {
    pub gap_before: f64,
    pub gap_after: f64,
    pub reassignments: Vec<NodeReassignment>,
    pub drain_moves: MigrationPlan,
    /// Nodes selected for draining whose replicas could not all be placed.
    pub skipped: Vec<u32>,
    /// Follow-up balancing in the (low, high) pools.
    pub follow_up: Vec<ConvergeReport>,
}

/// Number of lowest-utilization nodes to hand over so that the RU gap between
/// the pools shrinks at least by half. Falls back to the count that narrows it
/// most when half is out of reach.
pub fn nodes_to_move(low: &PoolState, high: &PoolState) -> usize {
    let (load_l, cap_l) = (low.load(Dimension::Ru), low.ru_capacity());
    let (load_h, cap_h) = (high.load(Dimension::Ru), high.ru_capacity());
    let gap = load_h / cap_h - load_l / cap_l;
    let order = by_util(low);
    let mut moved_cap = 0.0;
    let mut best = (0usize, gap.abs());
    for (k, idx) in order.iter().enumerate().take(low.nodes.len().saturating_sub(1)) {
        moved_cap += low.nodes[*idx].ru_capacity;
        let g = load_h / (cap_h + moved_cap) - load_l / (cap_l - moved_cap);
        if g <= gap / 2.0 && g >= -gap / 2.0 {
            return k + 1;
        }
        if g.abs() < best.1 {
            best = (k + 1, g.abs());
        }
    }
    best.0
}

fn by_util(pool: &PoolState) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pool.nodes.len()).collect();
    order.sort_by(|a, b| {
        pool.nodes[*a].util(Dimension::Ru).total_cmp(&pool.nodes[*b].util(Dimension::Ru)).then(a.cmp(b))
    });
    order
}

/// Empties node `idx` into the rest of the pool, skipping `excluded` nodes.
/// Leaves the pool untouched and returns `None` when some replica fits nowhere.
fn drain(pool: &mut PoolState, idx: usize, excluded: &[usize]) -> Option<MigrationPlan> {
    let snapshot = pool.clone();
    let mut plan = Vec::new();
    let mut members = pool.nodes[idx].replicas.clone();
    members.sort_by(|a, b| pool.replicas[*b].ru.peak().total_cmp(&pool.replicas[*a].ru.peak()).then(a.cmp(b)));
    for r in members {
        let re = pool.replicas[r].clone();
        let dst = (0..pool.nodes.len())
            .filter(|d| *d != idx && !excluded.contains(d) && !pool.hosts_sibling(*d, r))
            .filter(|d| {
                let n = &pool.nodes[*d];
                n.storage_sum.peak_with(&re.storage) <= n.storage_capacity
            })
            .min_by(|a, b| {
                let ua = pool.nodes[*a].ru_sum.peak_with(&re.ru) / pool.nodes[*a].ru_capacity;
                let ub = pool.nodes[*b].ru_sum.peak_with(&re.ru) / pool.nodes[*b].ru_capacity;
                ua.total_cmp(&ub).then(a.cmp(b))
            });
        let Some(dst) = dst else {
            *pool = snapshot;
            return None;
        };
        plan.push(Migration {
            replica: re.key,
            replica_index: r,
            src: pool.nodes[idx].id,
            dst: pool.nodes[dst].id,
            gain: 0.0,
            dimension: None,
            bytes: re.storage.peak(),
        });
        pool.apply_move(r, dst);
    }
    Some(plan)
}

fn gap(pools: &[PoolState]) -> (usize, usize, f64) {
    let rs: Vec<f64> = pools.iter().map(|p| p.optimal().r).collect();
    let hi = (0..rs.len()).max_by(|a, b| rs[*a].total_cmp(&rs[*b])).expect("pools");
    let lo = (0..rs.len()).min_by(|a, b| rs[*a].total_cmp(&rs[*b])).expect("pools");
    (lo, hi, rs[hi] - rs[lo])
}

/// Reassigns nodes from the least to the most utilized pool when their RU
/// utilization gap reaches the trigger, then rebalances both pools.
pub fn inter_pool_reschedule(pools: &mut [PoolState], cfg: &RescheduleConfig) -> InterPoolOutcome {
    let mut out = InterPoolOutcome {
        gap_before: 0.0,
        gap_after: 0.0,
        reassignments: Vec::new(),
        drain_moves: Vec::new(),
        skipped: Vec::new(),
        follow_up: Vec::new(),
    };
    if pools.len() < 2 {
        return out;
    }
    let (lo, hi, g) = gap(pools);
    out.gap_before = g;
    out.gap_after = g;
    if g < cfg.inter_pool_trigger {
        return out;
    }
    let k = nodes_to_move(&pools[lo], &pools[hi]);
    let chosen: Vec<u32> = by_util(&pools[lo]).into_iter().take(k).map(|i| pools[lo].nodes[i].id).collect();
    let mut drained = Vec::new();
    for id in &chosen {
        let low = &mut pools[lo];
        let idx = low.nodes.iter().position(|n| n.id == *id).expect("node");
        let excluded: Vec<usize> = chosen.iter().filter_map(|c| low.nodes.iter().position(|n| n.id == *c)).collect();
        match drain(low, idx, &excluded) {
            Some(plan) => {
                out.drain_moves.extend(plan);
                drained.push(*id);
            }
            None => {
                warn!("node {id} in pool {} cannot be drained; skipped", low.name);
                out.skipped.push(*id);
            }
        }
    }
    for id in drained {
        let idx = pools[lo].nodes.iter().position(|n| n.id == id).expect("node");
        let node = pools[lo].remove_node(idx).expect("drained node is empty");
        pools[hi].add_node(node);
        out.reassignments.push(NodeReassignment {
            node: id,
            from_pool: pools[lo].name.clone(),
            to_pool: pools[hi].name.clone(),
        });
    }
    for p in [lo, hi] {
        out.follow_up.push(converge(&mut pools[p], cfg, cfg.max_rounds));
    }
    let rl = pools[lo].optimal().r;
    let rh = pools[hi].optimal().r;
    out.gap_after = rh - rl;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reschedule::load::LoadVector;
    use crate::reschedule::pool::{NodeState, ReplicaKey};

    fn pool(name: &str, first_id: u32, nodes: u32, util: f64, tenant: u32) -> PoolState {
        let mut p = PoolState::new(name, (0..nodes).map(|i| NodeState::new(first_id + i, 1.0, 1.0)).collect());
        for n in 0..nodes {
            for j in 0..4 {
                let key = ReplicaKey { tenant, partition: n * 4 + j, ordinal: 0 };
                p.add_replica(key, n as usize, LoadVector::flat(util / 4.0), LoadVector::flat(0.05));
            }
        }
        p
    }

    #[test]
    fn nodes_flow_from_low_to_high() {
        let mut pools = vec![pool("hot", 0, 10, 0.8, 0), pool("cold", 100, 10, 0.2, 1)];
        let out = inter_pool_reschedule(&mut pools, &RescheduleConfig::default());
        assert_eq!(out.reassignments.len(), 4);
        assert!(out.reassignments.iter().all(|r| r.from_pool == "cold" && r.to_pool == "hot"));
        assert!(out.gap_after.abs() < out.gap_before);
        assert_eq!(pools[0].nodes.len(), 14);
        assert_eq!(pools[1].nodes.len(), 6);
        let total: usize = pools.iter().map(|p| p.replicas.len()).sum();
        assert_eq!(total, 80);
    }

    #[test]
    fn small_gap_is_noop() {
        let mut pools = vec![pool("a", 0, 4, 0.5, 0), pool("b", 10, 4, 0.4, 1)];
        let before = pools.clone();
        let out = inter_pool_reschedule(&mut pools, &RescheduleConfig::default());
        assert!(out.reassignments.is_empty());
        assert_eq!(pools, before);
    }

    #[test]
    fn undrainable_low_pool_reassigns_nothing() {
        // Every cold node is storage-full, so nothing can be moved off any node.
        let mut cold = PoolState::new("cold", (0..3).map(|i| NodeState::new(50 + i, 1.0, 1.0)).collect());
        for n in 0..3 {
            cold.add_replica(
                ReplicaKey { tenant: 1, partition: n, ordinal: 0 },
                n as usize,
                LoadVector::flat(0.1),
                LoadVector::flat(0.95),
            );
        }
        let mut pools = vec![pool("hot", 0, 3, 0.9, 0), cold];
        let out = inter_pool_reschedule(&mut pools, &RescheduleConfig::default());
        assert!(out.reassignments.is_empty());
        assert!(!out.skipped.is_empty());
        assert_eq!(pools[1].nodes.len(), 3);
    }
}
