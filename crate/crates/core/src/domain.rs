//! Entity model: tenants, partitions, replicas, data nodes and resource pools,
//! plus the placement bookkeeping the other modules read.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::{bucket_of, hash_u64, DEFAULT_HASH_SEED};
use crate::reschedule::LoadVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TenantId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PoolId(pub u32);

/// A partition is addressed by its tenant and its slot index in the tenant's
/// hash space. Splits renumber slot `i` into `2i` and `2i + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PartitionId {
    pub tenant: TenantId,
    pub index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReplicaId {
    pub partition: PartitionId,
    pub ordinal: u8,
}

impl fmt::Display for PartitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}/p{}", self.tenant.0, self.index)
    }
}

impl fmt::Display for ReplicaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/r{}", self.partition, self.ordinal)
    }
}

/// Item key. The simulator draws keys as integers within a tenant keyspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Key(pub u64);

/// Half-open interval of the 64-bit hash space. `end` may equal `2^64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyRange {
    pub start: u64,
    pub end: u128,
}

impl KeyRange {
    pub const FULL: KeyRange = KeyRange { start: 0, end: 1u128 << 64 };

    /// Range owned by slot `index` when the space is cut into `count` slots.
    pub fn for_slot(index: u32, count: u32) -> Self {
        let bound = |i: u128| -> u128 { (i << 64).div_ceil(u128::from(count)) };
        KeyRange { start: bound(u128::from(index)) as u64, end: bound(u128::from(index) + 1) }
    }

    pub fn contains(&self, hash: u64) -> bool {
        hash >= self.start && u128::from(hash) < self.end
    }

    pub fn width(&self) -> u128 {
        self.end - u128::from(self.start)
    }

    /// Midpoint split into two halves.
    pub fn split(&self) -> (KeyRange, KeyRange) {
        let mid = u128::from(self.start) + self.width().div_ceil(2);
        (KeyRange { start: self.start, end: mid }, KeyRange { start: mid as u64, end: self.end })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RequestKind {
    Get,
    Put,
    HLen,
    HGetAll,
}

impl RequestKind {
    pub fn is_write(self) -> bool {
        matches!(self, RequestKind::Put)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SizeClass {
    Small,
    Large,
}

impl SizeClass {
    pub fn of(payload: f64, large_threshold: u64) -> Self {
        if payload >= large_threshold as f64 {
            SizeClass::Large
        } else {
            SizeClass::Small
        }
    }
}

/// Default large-request threshold: two RU units.
pub const DEFAULT_LARGE_THRESHOLD: u64 = 4096;

/// One tenant operation flowing through admission, WFQ, cache and disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub id: u64,
    pub tenant: TenantId,
    pub partition: PartitionId,
    pub kind: RequestKind,
    pub key: Key,
    /// Write payload, or the expected read payload when known.
    pub value_size: u64,
    pub arrival_us: u64,
    pub size_class: SizeClass,
    pub charged_ru: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tenant {
    pub id: TenantId,
    pub name: String,
    pub pool: PoolId,
    /// Tenant quota Q_T, RU/s.
    pub ru_quota: f64,
    pub storage_quota: f64,
    pub partition_count: u32,
    /// Partition quota Q_P. Equal to `ru_quota / partition_count` unless a
    /// downscale clamped it at the lower bound.
    pub partition_quota: f64,
    pub proxy_count: u32,
    pub proxy_group_count: u32,
    /// Bytes of data held per replica of each partition.
    pub partition_storage_bytes: f64,
}

impl Tenant {
    pub fn proxy_quota(&self) -> f64 {
        self.ru_quota / f64::from(self.proxy_count)
    }

    pub fn proxy_group_size(&self) -> u32 {
        self.proxy_count / self.proxy_group_count
    }

    /// Proxy index ranges of each proxy group.
    pub fn proxy_groups(&self) -> Vec<Range<u32>> {
        let size = self.proxy_group_size();
        (0..self.proxy_group_count).map(|g| g * size..(g + 1) * size).collect()
    }

    /// Sets Q_T and recomputes Q_P.
    pub fn set_ru_quota(&mut self, quota: f64) {
        self.ru_quota = quota;
        self.partition_quota = quota / f64::from(self.partition_count);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replica {
    pub id: ReplicaId,
    pub node: NodeId,
    pub ru_load: LoadVector,
    pub storage_load: LoadVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub id: PartitionId,
    pub key_range: KeyRange,
    pub quota: f64,
    pub replicas: Vec<Replica>,
}

impl Partition {
    /// The replica that serves client traffic.
    pub fn primary(&self) -> &Replica {
        &self.replicas[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataNode {
    pub id: NodeId,
    pub name: String,
    pub pool: PoolId,
    pub ru_capacity: f64,
    pub storage_capacity: f64,
    pub replicas: Vec<ReplicaId>,
    pub is_migrating: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourcePool {
    pub id: PoolId,
    pub name: String,
    pub nodes: Vec<NodeId>,
    pub ru_capacity: f64,
    pub storage_capacity: f64,
}

// ---------------------------------------------------------------------------
// Topology description (also the `pools`/`tenants` part of a scenario file).

fn default_replica_count() -> u32 {
    3
}

fn default_one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    pub ru_capacity: f64,
    pub storage_capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolSpec {
    pub name: String,
    pub nodes: Vec<NodeSpec>,
}

/// How a tenant's replicas are laid out at build time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Placement {
    /// Round-robin over every node of the pool, starting at a per-tenant offset.
    #[default]
    RoundRobin,
    /// Round-robin over only the first `nodes` nodes of the pool.
    Packed { nodes: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TenantSpec {
    pub name: String,
    pub pool: String,
    pub ru_quota: f64,
    #[serde(default)]
    pub storage_quota: f64,
    pub partitions: u32,
    #[serde(default = "default_one")]
    pub proxies: u32,
    #[serde(default = "default_one")]
    pub proxy_groups: u32,
    /// Bytes stored per partition replica; drives the storage dimension.
    #[serde(default)]
    pub partition_storage_bytes: f64,
    #[serde(default)]
    pub placement: Placement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub pools: Vec<PoolSpec>,
    pub tenants: Vec<TenantSpec>,
    #[serde(default = "default_replica_count")]
    pub replica_count: u32,
    #[serde(default)]
    pub hash_seed: Option<u64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("invalid topology: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("unknown tenant {0:?}")]
    UnknownTenant(String),
}

impl TopologySpec {
    /// Checks internal consistency; returns every offending field.
    pub fn validate(&self) -> Result<(), DomainError> {
        let mut errs = Vec::new();
        if self.replica_count == 0 {
            errs.push("replica_count: must be >= 1".to_string());
        }
        if self.pools.is_empty() {
            errs.push("pools: at least one pool is required".to_string());
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, p) in self.pools.iter().enumerate() {
            if !seen.insert(p.name.as_str()) {
                errs.push(format!("pools[{i}].name: duplicate pool {:?}", p.name));
            }
            if p.nodes.is_empty() {
                errs.push(format!("pools[{i}].nodes: pool {:?} has no nodes", p.name));
            }
            for (j, n) in p.nodes.iter().enumerate() {
                if !(n.ru_capacity > 0.0) {
                    errs.push(format!("pools[{i}].nodes[{j}].ru_capacity: must be > 0"));
                }
                if !(n.storage_capacity > 0.0) {
                    errs.push(format!("pools[{i}].nodes[{j}].storage_capacity: must be > 0"));
                }
            }
        }
        let mut tenant_names = std::collections::BTreeSet::new();
        for (i, t) in self.tenants.iter().enumerate() {
            if !tenant_names.insert(t.name.as_str()) {
                errs.push(format!("tenants[{i}].name: duplicate tenant {:?}", t.name));
            }
            if !self.pools.iter().any(|p| p.name == t.pool) {
                errs.push(format!("tenants[{i}].pool: unknown pool {:?}", t.pool));
            }
            if !(t.ru_quota > 0.0) {
                errs.push(format!("tenants[{i}].ru_quota: must be > 0"));
            }
            if t.storage_quota < 0.0 {
                errs.push(format!("tenants[{i}].storage_quota: must be >= 0"));
            }
            if t.partition_storage_bytes < 0.0 {
                errs.push(format!("tenants[{i}].partition_storage_bytes: must be >= 0"));
            }
            if t.partitions == 0 {
                errs.push(format!("tenants[{i}].partitions: must be >= 1"));
            }
            if t.proxies == 0 {
                errs.push(format!("tenants[{i}].proxies: must be >= 1"));
            }
            if t.proxy_groups == 0 {
                errs.push(format!("tenants[{i}].proxy_groups: must be >= 1"));
            } else if t.proxies % t.proxy_groups != 0 {
                errs.push(format!(
                    "tenants[{i}].proxy_groups: {} does not divide proxies {}",
                    t.proxy_groups, t.proxies
                ));
            }
            if let Placement::Packed { nodes } = t.placement {
                if nodes == 0 {
                    errs.push(format!("tenants[{i}].placement.nodes: must be >= 1"));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(DomainError::Validation(errs))
        }
    }
}

/// The mutable state of the whole simulated deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub pools: Vec<ResourcePool>,
    pub nodes: Vec<DataNode>,
    pub tenants: Vec<Tenant>,
    partitions: Vec<Vec<Partition>>,
    pub replica_count: u32,
    pub hash_seed: u64,
}

/// Validates `spec` and lays out one replica set per partition.
pub fn build_topology(spec: &TopologySpec) -> Result<World, DomainError> {
    spec.validate()?;
    let mut pools = Vec::new();
    let mut nodes = Vec::new();
    for (pi, p) in spec.pools.iter().enumerate() {
        let pool_id = PoolId(pi as u32);
        let mut ids = Vec::new();
        for n in &p.nodes {
            let id = NodeId(nodes.len() as u32);
            ids.push(id);
            nodes.push(DataNode {
                id,
                name: n.name.clone(),
                pool: pool_id,
                ru_capacity: n.ru_capacity,
                storage_capacity: n.storage_capacity,
                replicas: Vec::new(),
                is_migrating: false,
            });
        }
        pools.push(ResourcePool {
            id: pool_id,
            name: p.name.clone(),
            nodes: ids,
            ru_capacity: 0.0,
            storage_capacity: 0.0,
        });
    }

    let mut tenants = Vec::new();
    let mut partitions = Vec::new();
    for (ti, t) in spec.tenants.iter().enumerate() {
        let tid = TenantId(ti as u32);
        let pool_idx = spec.pools.iter().position(|p| p.name == t.pool).expect("validated");
        let pool_nodes = pools[pool_idx].nodes.clone();
        let span = match t.placement {
            Placement::RoundRobin => pool_nodes.len(),
            Placement::Packed { nodes } => (nodes as usize).min(pool_nodes.len()),
        };
        let offset = match t.placement {
            Placement::RoundRobin => ti,
            Placement::Packed { .. } => 0,
        };
        let tenant = Tenant {
            id: tid,
            name: t.name.clone(),
            pool: PoolId(pool_idx as u32),
            ru_quota: t.ru_quota,
            storage_quota: t.storage_quota,
            partition_count: t.partitions,
            partition_quota: t.ru_quota / f64::from(t.partitions),
            proxy_count: t.proxies,
            proxy_group_count: t.proxy_groups,
            partition_storage_bytes: t.partition_storage_bytes,
        };
        let mut parts = Vec::with_capacity(t.partitions as usize);
        let mut slot = offset;
        for index in 0..t.partitions {
            let pid = PartitionId { tenant: tid, index };
            let mut replicas = Vec::new();
            for ordinal in 0..spec.replica_count {
                let node = pool_nodes[slot % span];
                slot += 1;
                let rid = ReplicaId { partition: pid, ordinal: ordinal as u8 };
                nodes[node.0 as usize].replicas.push(rid);
                replicas.push(Replica {
                    id: rid,
                    node,
                    ru_load: LoadVector::zero(),
                    storage_load: LoadVector::flat(t.partition_storage_bytes),
                });
            }
            parts.push(Partition {
                id: pid,
                key_range: KeyRange::for_slot(index, t.partitions),
                quota: tenant.partition_quota,
                replicas,
            });
        }
        tenants.push(tenant);
        partitions.push(parts);
    }

    let mut world = World {
        pools,
        nodes,
        tenants,
        partitions,
        replica_count: spec.replica_count,
        hash_seed: spec.hash_seed.unwrap_or(DEFAULT_HASH_SEED),
    };
    world.recompute_pool_capacities();
    Ok(world)
}

/// Slot index of `key` among `partition_count` partitions.
pub fn partition_index(hash_seed: u64, partition_count: u32, key: Key) -> u32 {
    bucket_of(hash_u64(hash_seed, key.0), partition_count)
}

impl World {
    pub fn tenant(&self, id: TenantId) -> &Tenant {
        &self.tenants[id.0 as usize]
    }

    pub fn tenant_by_name(&self, name: &str) -> Result<TenantId, DomainError> {
        self.tenants
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.id)
            .ok_or_else(|| DomainError::UnknownTenant(name.to_string()))
    }

    pub fn node(&self, id: NodeId) -> &DataNode {
        &self.nodes[id.0 as usize]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut DataNode {
        &mut self.nodes[id.0 as usize]
    }

    pub fn partitions(&self, tenant: TenantId) -> &[Partition] {
        &self.partitions[tenant.0 as usize]
    }

    pub fn partition(&self, id: PartitionId) -> &Partition {
        &self.partitions[id.tenant.0 as usize][id.index as usize]
    }

    pub fn partition_mut(&mut self, id: PartitionId) -> &mut Partition {
        &mut self.partitions[id.tenant.0 as usize][id.index as usize]
    }

    pub fn replica(&self, id: ReplicaId) -> &Replica {
        &self.partition(id.partition).replicas[id.ordinal as usize]
    }

    pub fn replica_mut(&mut self, id: ReplicaId) -> &mut Replica {
        &mut self.partition_mut(id.partition).replicas[id.ordinal as usize]
    }

    /// Deterministic key-to-partition mapping.
    pub fn partition_of(&self, tenant: TenantId, key: Key) -> &Partition {
        let t = self.tenant(tenant);
        let idx = partition_index(self.hash_seed, t.partition_count, key);
        &self.partitions[tenant.0 as usize][idx as usize]
    }

    /// Node that serves client traffic for `partition`.
    pub fn primary_node(&self, partition: PartitionId) -> NodeId {
        self.partition(partition).primary().node
    }

    /// Sum of the partition quotas whose primaries live on `node`.
    pub fn node_quota_sum(&self, node: NodeId) -> f64 {
        self.node(node).replicas.iter().filter(|r| r.ordinal == 0).map(|r| self.partition(r.partition).quota).sum()
    }

    pub fn recompute_pool_capacities(&mut self) {
        for pool in &mut self.pools {
            pool.ru_capacity = pool.nodes.iter().map(|n| self.nodes[n.0 as usize].ru_capacity).sum();
            pool.storage_capacity = pool.nodes.iter().map(|n| self.nodes[n.0 as usize].storage_capacity).sum();
        }
    }

    /// Moves a replica to `dst`, keeping node replica lists consistent.
    pub fn move_replica(&mut self, id: ReplicaId, dst: NodeId) {
        let src = self.replica(id).node;
        if src == dst {
            return;
        }
        self.node_mut(src).replicas.retain(|r| *r != id);
        self.node_mut(dst).replicas.push(id);
        self.replica_mut(id).node = dst;
    }

    /// Reassigns a node to another pool; the node must be empty.
    pub fn reassign_node(&mut self, node: NodeId, pool: PoolId) {
        let old = self.node(node).pool;
        self.pools[old.0 as usize].nodes.retain(|n| *n != node);
        self.pools[pool.0 as usize].nodes.push(node);
        self.node_mut(node).pool = pool;
        self.recompute_pool_capacities();
    }

    /// Sets Q_T and Q_P for a tenant and propagates Q_P to its partitions.
    pub fn set_quotas(&mut self, tenant: TenantId, ru_quota: f64, partition_quota: f64) {
        let t = &mut self.tenants[tenant.0 as usize];
        t.ru_quota = ru_quota;
        t.partition_quota = partition_quota;
        for p in &mut self.partitions[tenant.0 as usize] {
            p.quota = partition_quota;
        }
    }

    /// Binary split of every partition of `tenant`. Child ranges are the
    /// slots of the doubled partition count, so `partition_of` stays exact;
    /// children inherit their parent's replica placement.
    pub fn split_partitions(&mut self, tenant: TenantId) {
        let old = std::mem::take(&mut self.partitions[tenant.0 as usize]);
        let quota = self.tenants[tenant.0 as usize].partition_quota;
        let mut next = Vec::with_capacity(old.len() * 2);
        let count = old.len() as u32 * 2;
        for parent in &old {
            for half in 0..2 {
                let index = parent.id.index * 2 + half;
                let pid = PartitionId { tenant, index };
                let range = KeyRange::for_slot(index, count);
                let replicas = parent
                    .replicas
                    .iter()
                    .map(|r| Replica {
                        id: ReplicaId { partition: pid, ordinal: r.id.ordinal },
                        node: r.node,
                        ru_load: r.ru_load.scaled(0.5),
                        storage_load: r.storage_load.scaled(0.5),
                    })
                    .collect();
                next.push(Partition { id: pid, key_range: range, quota, replicas });
            }
        }
        for node in &mut self.nodes {
            node.replicas.retain(|r| r.partition.tenant != tenant);
        }
        for p in &next {
            for r in &p.replicas {
                self.nodes[r.node.0 as usize].replicas.push(r.id);
            }
        }
        self.partitions[tenant.0 as usize] = next;
        let t = &mut self.tenants[tenant.0 as usize];
        t.partition_count *= 2;
        t.partition_storage_bytes *= 0.5;
    }

    /// Replica ids of `tenant` grouped per node of `pool`.
    pub fn tenant_replica_counts(&self, tenant: TenantId) -> Vec<(NodeId, usize)> {
        let pool = self.tenant(tenant).pool;
        self.pools[pool.0 as usize]
            .nodes
            .iter()
            .map(|n| {
                let c = self.node(*n).replicas.iter().filter(|r| r.partition.tenant == tenant).count();
                (*n, c)
            })
            .collect()
    }
}
