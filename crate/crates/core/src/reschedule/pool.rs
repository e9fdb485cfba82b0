//! Pool snapshots: the planner's view of nodes and replica load vectors,
//! plus the seeded generator used for offline experiments.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::load::{Dimension, LoadVector, SLOTS};

/// Identity of a replica inside a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReplicaKey {
    pub tenant: u32,
    pub partition: u32,
    pub ordinal: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub id: u32,
    pub ru_capacity: f64,
    pub storage_capacity: f64,
    pub migrating: bool,
    pub replicas: Vec<usize>,
    pub ru_sum: LoadVector,
    pub storage_sum: LoadVector,
}

impl NodeState {
    pub fn new(id: u32, ru_capacity: f64, storage_capacity: f64) -> Self {
        NodeState {
            id,
            ru_capacity,
            storage_capacity,
            migrating: false,
            replicas: Vec::new(),
            ru_sum: LoadVector::zero(),
            storage_sum: LoadVector::zero(),
        }
    }

    pub fn capacity(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Ru => self.ru_capacity,
            Dimension::Storage => self.storage_capacity,
        }
    }

    pub fn sum(&self, dim: Dimension) -> &LoadVector {
        match dim {
            Dimension::Ru => &self.ru_sum,
            Dimension::Storage => &self.storage_sum,
        }
    }

    /// Peak load over the day divided by capacity.
    pub fn util(&self, dim: Dimension) -> f64 {
        self.sum(dim).peak() / self.capacity(dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaState {
    pub key: ReplicaKey,
    pub node: usize,
    pub ru: LoadVector,
    pub storage: LoadVector,
}

impl ReplicaState {
    pub fn load(&self, dim: Dimension) -> &LoadVector {
        match dim {
            Dimension::Ru => &self.ru,
            Dimension::Storage => &self.storage,
        }
    }
}

/// Pool-wide utilization target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalLoad {
    pub r: f64,
    pub s: f64,
}

impl OptimalLoad {
    pub fn get(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Ru => self.r,
            Dimension::Storage => self.s,
        }
    }
}

#[derive(Debug, Error)]
pub enum PoolError {
    #[error("invalid pool snapshot: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("node {0} is not empty")]
    NotEmpty(u32),
}

/// Mutable planner state for one resource pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolState {
    pub name: String,
    pub nodes: Vec<NodeState>,
    pub replicas: Vec<ReplicaState>,
}

impl PoolState {
    pub fn new(name: impl Into<String>, nodes: Vec<NodeState>) -> Self {
        PoolState { name: name.into(), nodes, replicas: Vec::new() }
    }

    pub fn add_replica(&mut self, key: ReplicaKey, node: usize, ru: LoadVector, storage: LoadVector) -> usize {
        let idx = self.replicas.len();
        self.replicas.push(ReplicaState { key, node, ru, storage });
        let n = &mut self.nodes[node];
        n.replicas.push(idx);
        n.ru_sum += ru;
        n.storage_sum += storage;
        idx
    }

    pub fn ru_capacity(&self) -> f64 {
        self.nodes.iter().map(|n| n.ru_capacity).sum()
    }

    pub fn storage_capacity(&self) -> f64 {
        self.nodes.iter().map(|n| n.storage_capacity).sum()
    }

    /// Peak of the summed replica vectors of the whole pool.
    pub fn load(&self, dim: Dimension) -> f64 {
        let mut total = LoadVector::zero();
        for n in &self.nodes {
            total += *n.sum(dim);
        }
        total.peak()
    }

    pub fn optimal(&self) -> OptimalLoad {
        OptimalLoad {
            r: self.load(Dimension::Ru) / self.ru_capacity(),
            s: self.load(Dimension::Storage) / self.storage_capacity(),
        }
    }

    /// Moves replica `r` to node `dst`, keeping node sums current.
    pub fn apply_move(&mut self, r: usize, dst: usize) {
        let src = self.replicas[r].node;
        if src == dst {
            return;
        }
        let (ru, sto) = (self.replicas[r].ru, self.replicas[r].storage);
        let s = &mut self.nodes[src];
        s.replicas.retain(|x| *x != r);
        s.ru_sum = recompute(&s.replicas, &self.replicas, Dimension::Ru);
        s.storage_sum = recompute(&s.replicas, &self.replicas, Dimension::Storage);
        let d = &mut self.nodes[dst];
        d.replicas.push(r);
        d.ru_sum += ru;
        d.storage_sum += sto;
        self.replicas[r].node = dst;
    }

    /// Number of replicas of `tenant` on each node.
    pub fn tenant_counts(&self, tenant: u32) -> Vec<usize> {
        let mut c = vec![0; self.nodes.len()];
        for r in &self.replicas {
            if r.key.tenant == tenant {
                c[r.node] += 1;
            }
        }
        c
    }

    pub fn tenants(&self) -> Vec<u32> {
        let mut t: Vec<u32> = self.replicas.iter().map(|r| r.key.tenant).collect();
        t.sort_unstable();
        t.dedup();
        t
    }

    /// True when `node` already hosts a replica of the same partition as `r`.
    pub fn hosts_sibling(&self, node: usize, r: usize) -> bool {
        let k = self.replicas[r].key;
        self.nodes[node].replicas.iter().any(|x| {
            let o = self.replicas[*x].key;
            *x != r && o.tenant == k.tenant && o.partition == k.partition
        })
    }

    /// Detaches an empty node from the pool.
    pub fn remove_node(&mut self, idx: usize) -> Result<NodeState, PoolError> {
        if !self.nodes[idx].replicas.is_empty() {
            return Err(PoolError::NotEmpty(self.nodes[idx].id));
        }
        let node = self.nodes.remove(idx);
        for r in &mut self.replicas {
            if r.node > idx {
                r.node -= 1;
            }
        }
        Ok(node)
    }

    pub fn add_node(&mut self, mut node: NodeState) -> usize {
        node.replicas.clear();
        node.ru_sum = LoadVector::zero();
        node.storage_sum = LoadVector::zero();
        node.migrating = false;
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn clear_migrating(&mut self) {
        for n in &mut self.nodes {
            n.migrating = false;
        }
    }

    pub fn utils(&self, dim: Dimension) -> Vec<f64> {
        self.nodes.iter().map(|n| n.util(dim)).collect()
    }

    pub fn stats(&self) -> PoolStats {
        let (ru_mean, ru_std) = mean_std(&self.utils(Dimension::Ru));
        let (sto_mean, sto_std) = mean_std(&self.utils(Dimension::Storage));
        PoolStats {
            nodes: self.nodes.len(),
            replicas: self.replicas.len(),
            ru_util_mean: ru_mean,
            ru_util_std: ru_std,
            storage_util_mean: sto_mean,
            storage_util_std: sto_std,
            storage_util_var: sto_std * sto_std,
        }
    }

    pub fn to_snapshot(&self) -> PoolSnapshot {
        PoolSnapshot {
            name: self.name.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord { id: n.id, ru_capacity: n.ru_capacity, storage_capacity: n.storage_capacity })
                .collect(),
            replicas: self
                .replicas
                .iter()
                .map(|r| ReplicaRecord {
                    tenant: r.key.tenant,
                    partition: r.key.partition,
                    ordinal: r.key.ordinal,
                    node: self.nodes[r.node].id,
                    ru: r.ru,
                    storage: r.storage,
                })
                .collect(),
        }
    }

    pub fn from_snapshot(snap: &PoolSnapshot) -> Result<Self, PoolError> {
        let mut errs = Vec::new();
        let mut index = BTreeMap::new();
        for (i, n) in snap.nodes.iter().enumerate() {
            if index.insert(n.id, i).is_some() {
                errs.push(format!("nodes[{i}].id: duplicate node id {}", n.id));
            }
            if !(n.ru_capacity > 0.0) || !(n.storage_capacity > 0.0) {
                errs.push(format!("nodes[{i}]: capacities must be > 0"));
            }
        }
        let mut seen = BTreeMap::new();
        for (i, r) in snap.replicas.iter().enumerate() {
            if !index.contains_key(&r.node) {
                errs.push(format!("replicas[{i}].node: unknown node {}", r.node));
            }
            if r.ru.0.iter().chain(&r.storage.0).any(|x| !(*x >= 0.0)) {
                errs.push(format!("replicas[{i}]: loads must be non-negative"));
            }
            let key = (r.tenant, r.partition, r.ordinal);
            if seen.insert(key, i).is_some() {
                errs.push(format!("replicas[{i}]: duplicate replica {key:?}"));
            }
        }
        if !errs.is_empty() {
            return Err(PoolError::Invalid(errs));
        }
        let nodes = snap.nodes.iter().map(|n| NodeState::new(n.id, n.ru_capacity, n.storage_capacity)).collect();
        let mut pool = PoolState::new(snap.name.clone(), nodes);
        for r in &snap.replicas {
            let key = ReplicaKey { tenant: r.tenant, partition: r.partition, ordinal: r.ordinal };
            pool.add_replica(key, index[&r.node], r.ru, r.storage);
        }
        Ok(pool)
    }
}

fn recompute(members: &[usize], replicas: &[ReplicaState], dim: Dimension) -> LoadVector {
    let mut v = LoadVector::zero();
    for m in members {
        v += *replicas[*m].load(dim);
    }
    v
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolStats {
    pub nodes: usize,
    pub replicas: usize,
    pub ru_util_mean: f64,
    pub ru_util_std: f64,
    pub storage_util_mean: f64,
    pub storage_util_std: f64,
    pub storage_util_var: f64,
}

// ---------------------------------------------------------------------------
// File formats

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: u32,
    pub ru_capacity: f64,
    pub storage_capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicaRecord {
    pub tenant: u32,
    pub partition: u32,
    #[serde(default)]
    pub ordinal: u8,
    pub node: u32,
    pub ru: LoadVector,
    pub storage: LoadVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSnapshot {
    pub name: String,
    pub nodes: Vec<NodeRecord>,
    pub replicas: Vec<ReplicaRecord>,
}

/// A pool-state file: explicit snapshots, or a generator recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PoolFile {
    Snapshot { pools: Vec<PoolSnapshot> },
    Generator(PoolGenerator),
}

impl PoolFile {
    pub fn into_pools(self) -> Result<Vec<PoolState>, PoolError> {
        match self {
            PoolFile::Snapshot { pools } => pools.iter().map(PoolState::from_snapshot).collect(),
            PoolFile::Generator(g) => Ok(vec![g.generate()]),
        }
    }
}

fn default_replicas() -> u8 {
    3
}

/// Recipe for a skewed pool. Replica loads are lognormal; placement favours
/// low-numbered nodes with weight `exp(-i / placement_skew)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolGenerator {
    pub name: String,
    pub seed: u64,
    pub nodes: u32,
    pub tenants: u32,
    pub partitions_min: u32,
    pub partitions_max: u32,
    #[serde(default = "default_replicas")]
    pub replicas: u8,
    /// Lognormal parameters of a replica's peak RU (RU/s).
    pub ru_mu: f64,
    pub ru_sigma: f64,
    /// Lognormal parameters of a replica's stored bytes.
    pub storage_mu: f64,
    pub storage_sigma: f64,
    /// Relative amplitude of the daily RU swing, in [0, 1).
    pub diurnal_amplitude: f64,
    pub placement_skew: f64,
    /// Node capacities are sized so the pool sits at these utilizations.
    pub target_ru_util: f64,
    pub target_storage_util: f64,
}

impl PoolGenerator {
    pub fn generate(&self) -> PoolState {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let ru_dist = LogNormal::new(self.ru_mu, self.ru_sigma).expect("valid lognormal");
        let sto_dist = LogNormal::new(self.storage_mu, self.storage_sigma).expect("valid lognormal");
        let weights: Vec<f64> = (0..self.nodes).map(|i| (-f64::from(i) / self.placement_skew).exp()).collect();

        struct Pending {
            key: ReplicaKey,
            node: usize,
            ru: LoadVector,
            storage: LoadVector,
        }
        let mut pending = Vec::new();
        for tenant in 0..self.tenants {
            let parts = rng.random_range(self.partitions_min..=self.partitions_max);
            let phase = rng.random_range(0..SLOTS) as f64;
            for partition in 0..parts {
                let peak = ru_dist.sample(&mut rng);
                let bytes = sto_dist.sample(&mut rng);
                let mut ru = LoadVector::zero();
                for (i, slot) in ru.0.iter_mut().enumerate() {
                    let angle = 2.0 * std::f64::consts::PI * (i as f64 + phase) / SLOTS as f64;
                    *slot = peak * (1.0 - self.diurnal_amplitude * 0.5 * (1.0 - angle.cos()));
                }
                let mut w = weights.clone();
                for ordinal in 0..self.replicas {
                    let node = weighted_pick(&mut rng, &w);
                    w[node] = 0.0;
                    pending.push(Pending {
                        key: ReplicaKey { tenant, partition, ordinal },
                        node,
                        ru,
                        storage: LoadVector::flat(bytes),
                    });
                }
            }
        }
        let mut total_ru = LoadVector::zero();
        let mut total_sto = 0.0;
        for p in &pending {
            total_ru += p.ru;
            total_sto += p.storage.0[0];
        }
        let n = f64::from(self.nodes);
        let ru_cap = total_ru.peak() / (n * self.target_ru_util);
        let sto_cap = total_sto / (n * self.target_storage_util);
        let nodes = (0..self.nodes).map(|i| NodeState::new(i, ru_cap, sto_cap)).collect();
        let mut pool = PoolState::new(self.name.clone(), nodes);
        for p in pending {
            pool.add_replica(p.key, p.node, p.ru, p.storage);
        }
        pool
    }
}

fn weighted_pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).expect("positive weight")
}
