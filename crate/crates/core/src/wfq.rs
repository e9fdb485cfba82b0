//! Dual-layer weighted fair queueing inside a data node.
//!
//! Both layers keep four class queues (read/write by small/large). The CPU
//! layer charges RU and enforces the concurrency limits and the per-tenant
//! share cap; the I/O layer charges IOPS and runs on a basic thread pool with
//! a few extra threads reserved for tenants other than a monopolizing one.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{RequestKind, SizeClass, TenantId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueueClass {
    ReadSmall,
    ReadLarge,
    WriteSmall,
    WriteLarge,
}

impl QueueClass {
    pub const ALL: [QueueClass; 4] =
        [QueueClass::ReadSmall, QueueClass::ReadLarge, QueueClass::WriteSmall, QueueClass::WriteLarge];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_write(self) -> bool {
        matches!(self, QueueClass::WriteSmall | QueueClass::WriteLarge)
    }
}

/// Class of a request from its kind and payload size (actual or estimated).
pub fn classify(kind: RequestKind, payload: f64, large_threshold: u64) -> QueueClass {
    match (kind.is_write(), SizeClass::of(payload, large_threshold)) {
        (false, SizeClass::Small) => QueueClass::ReadSmall,
        (false, SizeClass::Large) => QueueClass::ReadLarge,
        (true, SizeClass::Small) => QueueClass::WriteSmall,
        (true, SizeClass::Large) => QueueClass::WriteLarge,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WfqError {
    #[error("partition quota must be positive, got {0}")]
    ZeroQuota(f64),
    #[error("node quota sum {sum} is below the partition quota {quota}")]
    QuotaSum { quota: f64, sum: f64 },
}

/// Queue ordering. `Fifo` serves strictly by arrival and disables the
/// fairness rules; it models a node without WFQ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discipline {
    Vft,
    Fifo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VftEntry<T> {
    pub item: T,
    pub tenant: TenantId,
    pub class: QueueClass,
    pub cost: f64,
    pub vft: f64,
    pub seq: u64,
}

/// Threshold above which virtual times are rebased.
pub const VFT_REBASE_AT: f64 = 9_007_199_254_740_992.0;

/// Four class queues sharing one per-tenant virtual clock.
#[derive(Debug, Clone)]
pub struct ClassQueues<T> {
    discipline: Discipline,
    queues: [BTreeMap<TenantId, VecDeque<VftEntry<T>>>; 4],
    pre_vft: BTreeMap<TenantId, f64>,
    per_tenant: BTreeMap<TenantId, usize>,
    len: usize,
    next_seq: u64,
}

impl<T> ClassQueues<T> {
    pub fn new(discipline: Discipline) -> Self {
        ClassQueues {
            discipline,
            queues: Default::default(),
            pre_vft: BTreeMap::new(),
            per_tenant: BTreeMap::new(),
            len: 0,
            next_seq: 0,
        }
    }

    pub fn discipline(&self) -> Discipline {
        self.discipline
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn depth(&self, class: QueueClass) -> usize {
        self.queues[class.index()].values().map(VecDeque::len).sum()
    }

    pub fn tenant_len(&self, tenant: TenantId) -> usize {
        self.per_tenant.get(&tenant).copied().unwrap_or(0)
    }

    pub fn pre_vft(&self, tenant: TenantId) -> f64 {
        self.pre_vft.get(&tenant).copied().unwrap_or(0.0)
    }

    /// Pushes an entry with `vft = preVFT + cost * node_quota_sum / partition_quota`
    /// and advances the tenant's preVFT. Returns the assigned vft.
    pub fn enqueue(
        &mut self,
        item: T,
        tenant: TenantId,
        class: QueueClass,
        cost: f64,
        partition_quota: f64,
        node_quota_sum: f64,
    ) -> Result<f64, WfqError> {
        if !(partition_quota > 0.0) {
            return Err(WfqError::ZeroQuota(partition_quota));
        }
        if node_quota_sum < partition_quota * (1.0 - 1e-9) {
            return Err(WfqError::QuotaSum { quota: partition_quota, sum: node_quota_sum });
        }
        let pre = self.pre_vft.entry(tenant).or_insert(0.0);
        let vft = *pre + cost * node_quota_sum / partition_quota;
        *pre = vft;
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queues[class.index()].entry(tenant).or_default().push_back(VftEntry {
            item,
            tenant,
            class,
            cost,
            vft,
            seq,
        });
        *self.per_tenant.entry(tenant).or_insert(0) += 1;
        self.len += 1;
        if vft > VFT_REBASE_AT {
            self.rebase();
        }
        Ok(vft)
    }

    /// Subtracts the smallest preVFT from every virtual time.
    pub fn rebase(&mut self) {
        let Some(min) = self.pre_vft.values().copied().reduce(f64::min) else { return };
        for v in self.pre_vft.values_mut() {
            *v -= min;
        }
        for q in &mut self.queues {
            for e in q.values_mut().flat_map(|d| d.iter_mut()) {
                e.vft = (e.vft - min).max(0.0);
            }
        }
    }

    fn key(&self, e: &VftEntry<T>) -> (f64, u64) {
        match self.discipline {
            Discipline::Vft => (e.vft, e.seq),
            Discipline::Fifo => (0.0, e.seq),
        }
    }

    /// Removes and returns the smallest-key head for which `eligible` holds.
    pub fn pop_min(&mut self, mut eligible: impl FnMut(&VftEntry<T>) -> bool) -> Option<VftEntry<T>> {
        let mut best: Option<((f64, u64), QueueClass, TenantId)> = None;
        for class in QueueClass::ALL {
            for (tenant, dq) in &self.queues[class.index()] {
                let Some(head) = dq.front() else { continue };
                if !eligible(head) {
                    continue;
                }
                let k = self.key(head);
                if best.as_ref().is_none_or(|(bk, _, _)| k.0 < bk.0 || (k.0 == bk.0 && k.1 < bk.1)) {
                    best = Some((k, class, *tenant));
                }
            }
        }
        let (_, class, tenant) = best?;
        let q = &mut self.queues[class.index()];
        let dq = q.get_mut(&tenant).expect("head exists");
        let e = dq.pop_front().expect("head exists");
        if dq.is_empty() {
            q.remove(&tenant);
        }
        let n = self.per_tenant.get_mut(&tenant).expect("counted");
        *n -= 1;
        if *n == 0 {
            self.per_tenant.remove(&tenant);
        }
        self.len -= 1;
        Some(e)
    }

    /// Heads of every non-empty (class, tenant) queue.
    pub fn heads(&self) -> impl Iterator<Item = &VftEntry<T>> {
        self.queues.iter().flat_map(|q| q.values().filter_map(|d| d.front()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WfqLimits {
    pub max_inflight_reads: usize,
    pub max_inflight_writes: usize,
    pub max_inflight_write_ru: f64,
    /// Largest fraction of a kind's in-flight slots one tenant may hold.
    pub max_tenant_share: f64,
}

impl Default for WfqLimits {
    fn default() -> Self {
        WfqLimits {
            max_inflight_reads: 64,
            max_inflight_writes: 32,
            max_inflight_write_ru: 256.0,
            max_tenant_share: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct TenantInflight {
    reads: usize,
    writes: usize,
}

/// CPU layer: class queues plus the in-flight bookkeeping behind the
/// concurrency limits and the tenant share cap.
#[derive(Debug, Clone)]
pub struct CpuScheduler<T> {
    pub queues: ClassQueues<T>,
    limits: WfqLimits,
    reads: usize,
    writes: usize,
    write_ru: f64,
    tenants: BTreeMap<TenantId, TenantInflight>,
}

impl<T> CpuScheduler<T> {
    pub fn new(discipline: Discipline, limits: WfqLimits) -> Self {
        CpuScheduler {
            queues: ClassQueues::new(discipline),
            limits,
            reads: 0,
            writes: 0,
            write_ru: 0.0,
            tenants: BTreeMap::new(),
        }
    }

    pub fn limits(&self) -> &WfqLimits {
        &self.limits
    }

    pub fn inflight(&self) -> (usize, usize) {
        (self.reads, self.writes)
    }

    pub fn tenant_inflight(&self, tenant: TenantId) -> usize {
        self.tenants.get(&tenant).map_or(0, |t| t.reads + t.writes)
    }

    fn view(&self) -> CpuView<'_> {
        CpuView {
            limits: self.limits,
            reads: self.reads,
            writes: self.writes,
            write_ru: self.write_ru,
            tenants: &self.tenants,
            discipline: self.queues.discipline(),
        }
    }

    /// Dispatches the smallest eligible head and counts it as in flight.
    pub fn dequeue(&mut self) -> Option<VftEntry<T>> {
        let snapshot = CpuView {
            limits: self.limits,
            reads: self.reads,
            writes: self.writes,
            write_ru: self.write_ru,
            tenants: &self.tenants,
            discipline: self.queues.discipline(),
        };
        let e = self.queues.pop_min(|e| snapshot.eligible(e))?;
        let t = self.tenants.entry(e.tenant).or_default();
        if e.class.is_write() {
            self.writes += 1;
            self.write_ru += e.cost;
            t.writes += 1;
        } else {
            self.reads += 1;
            t.reads += 1;
        }
        Some(e)
    }

    /// Releases the in-flight slot taken by a dispatched entry.
    pub fn complete(&mut self, tenant: TenantId, class: QueueClass, cost: f64) {
        let t = self.tenants.get_mut(&tenant).expect("tenant has in-flight work");
        if class.is_write() {
            self.writes -= 1;
            self.write_ru = (self.write_ru - cost).max(0.0);
            t.writes -= 1;
        } else {
            self.reads -= 1;
            t.reads -= 1;
        }
        if t.reads + t.writes == 0 {
            self.tenants.remove(&tenant);
        }
        if self.writes == 0 {
            self.write_ru = 0.0;
        }
    }

    /// True when no head can be dispatched right now.
    pub fn blocked(&self) -> bool {
        let view = self.view();
        !self.queues.heads().any(|e| view.eligible(e))
    }
}

struct CpuView<'a> {
    limits: WfqLimits,
    reads: usize,
    writes: usize,
    write_ru: f64,
    tenants: &'a BTreeMap<TenantId, TenantInflight>,
    discipline: Discipline,
}

impl CpuView<'_> {
    fn eligible<T>(&self, e: &VftEntry<T>) -> bool {
        let l = &self.limits;
        let t = self.tenants.get(&e.tenant).copied().unwrap_or_default();
        let share_rule = self.discipline == Discipline::Vft && l.max_tenant_share < 1.0;
        let cap = |limit: usize| ((limit as f64 * l.max_tenant_share).floor() as usize).max(1);
        if e.class.is_write() {
            self.writes < l.max_inflight_writes
                && !(self.write_ru > 0.0 && self.write_ru + e.cost > l.max_inflight_write_ru)
                && !(share_rule && t.writes + 1 > cap(l.max_inflight_writes))
        } else {
            self.reads < l.max_inflight_reads && !(share_rule && t.reads + 1 > cap(l.max_inflight_reads))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThreadSlot {
    Basic(usize),
    Extra(usize),
}

/// Default number of extra threads for `basic` basic threads.
pub fn default_extra_threads(basic: usize) -> usize {
    (basic / 4).max(1)
}

/// I/O layer: class queues served by basic and extra threads.
#[derive(Debug, Clone)]
pub struct IoScheduler<T> {
    pub queues: ClassQueues<T>,
    basic: Vec<Option<TenantId>>,
    extra: Vec<Option<TenantId>>,
    activations: u64,
}

impl<T> IoScheduler<T> {
    pub fn new(discipline: Discipline, basic_threads: usize, extra_threads: usize) -> Self {
        assert!(basic_threads >= 1, "at least one basic I/O thread is required");
        IoScheduler {
            queues: ClassQueues::new(discipline),
            basic: vec![None; basic_threads],
            extra: vec![None; extra_threads],
            activations: 0,
        }
    }

    pub fn extra_activations(&self) -> u64 {
        self.activations
    }

    pub fn busy_threads(&self) -> usize {
        self.basic.iter().chain(&self.extra).filter(|s| s.is_some()).count()
    }

    /// The tenant holding every basic thread, if there is one.
    pub fn monopolist(&self) -> Option<TenantId> {
        let first = self.basic[0]?;
        self.basic.iter().all(|s| *s == Some(first)).then_some(first)
    }

    /// Assigns waiting entries to idle threads until none can be placed.
    pub fn dispatch(&mut self) -> Vec<(ThreadSlot, VftEntry<T>)> {
        let mut out = Vec::new();
        loop {
            if let Some(i) = self.basic.iter().position(Option::is_none) {
                let Some(e) = self.queues.pop_min(|_| true) else { break };
                self.basic[i] = Some(e.tenant);
                out.push((ThreadSlot::Basic(i), e));
                continue;
            }
            if self.queues.discipline() == Discipline::Fifo {
                break;
            }
            let Some(owner) = self.monopolist() else { break };
            let Some(i) = self.extra.iter().position(Option::is_none) else { break };
            let Some(e) = self.queues.pop_min(|e| e.tenant != owner) else { break };
            self.extra[i] = Some(e.tenant);
            self.activations += 1;
            out.push((ThreadSlot::Extra(i), e));
        }
        out
    }

    pub fn complete(&mut self, slot: ThreadSlot) {
        let s = match slot {
            ThreadSlot::Basic(i) => &mut self.basic[i],
            ThreadSlot::Extra(i) => &mut self.extra[i],
        };
        assert!(s.is_some(), "completing an idle thread");
        *s = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const A: TenantId = TenantId(0);
    const B: TenantId = TenantId(1);

    #[test]
    fn classify_examples() {
        assert_eq!(classify(RequestKind::Get, 1024.0, 4096), QueueClass::ReadSmall);
        assert_eq!(classify(RequestKind::Put, 8192.0, 4096), QueueClass::WriteLarge);
        // 1 + 50 fields of 2 KB each: roughly 100 KB estimated scan.
        let est_bytes = 50.0 * 2048.0;
        assert_eq!(classify(RequestKind::HGetAll, est_bytes, 4096), QueueClass::ReadLarge);
    }

    #[test]
    fn vft_examples() {
        let mut q = ClassQueues::new(Discipline::Vft);
        assert_eq!(q.enqueue((), A, QueueClass::ReadSmall, 3.0, 300.0, 400.0).unwrap(), 4.0);
        assert_eq!(q.enqueue((), B, QueueClass::ReadSmall, 3.0, 100.0, 400.0).unwrap(), 12.0);
        let mut solo = ClassQueues::new(Discipline::Vft);
        let c = 2.5;
        let v1 = solo.enqueue((), A, QueueClass::ReadSmall, c, 50.0, 50.0).unwrap();
        let v2 = solo.enqueue((), A, QueueClass::ReadSmall, c, 50.0, 50.0).unwrap();
        assert_eq!((v1, v2 - v1), (c, c));
        assert_eq!(solo.enqueue((), A, QueueClass::ReadSmall, 1.0, 0.0, 10.0), Err(WfqError::ZeroQuota(0.0)));
    }

    #[test]
    fn equal_vft_is_fifo() {
        let mut q = ClassQueues::new(Discipline::Vft);
        q.enqueue(1, A, QueueClass::ReadSmall, 1.0, 1.0, 2.0).unwrap();
        q.enqueue(2, B, QueueClass::ReadSmall, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(q.pop_min(|_| true).unwrap().item, 1);
        assert_eq!(q.pop_min(|_| true).unwrap().item, 2);
        assert!(q.pop_min(|_| true).is_none());
    }

    #[test]
    fn rebase_keeps_order() {
        let mut q = ClassQueues::new(Discipline::Vft);
        q.enqueue(0, B, QueueClass::ReadSmall, 1e6, 1.0, 1.0).unwrap();
        q.enqueue(1, A, QueueClass::ReadSmall, VFT_REBASE_AT, 1.0, 1.0).unwrap();
        q.enqueue(2, A, QueueClass::ReadSmall, 1e6, 1.0, 1.0).unwrap();
        assert!(q.pre_vft(A) <= VFT_REBASE_AT);
        assert_eq!(q.pre_vft(B), 0.0);
        let order: Vec<_> = std::iter::from_fn(|| q.pop_min(|_| true)).map(|e| e.item).collect();
        assert_eq!(order, vec![0, 1, 2]);
    }

    #[test]
    fn empty_cpu_dequeue_is_none() {
        let mut s: CpuScheduler<()> = CpuScheduler::new(Discipline::Vft, WfqLimits::default());
        assert!(s.dequeue().is_none());
    }

    #[test]
    fn share_cap_leaves_room_for_second_tenant() {
        let limits = WfqLimits { max_inflight_reads: 10, ..WfqLimits::default() };
        let mut s = CpuScheduler::new(Discipline::Vft, limits);
        for i in 0..20 {
            s.queues.enqueue(i, A, QueueClass::ReadSmall, 1.0, 1.0, 2.0).unwrap();
        }
        let mut taken = 0;
        while s.dequeue().is_some() {
            taken += 1;
        }
        assert_eq!(taken, 9);
        s.queues.enqueue(99, B, QueueClass::ReadSmall, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(s.dequeue().unwrap().item, 99);
        assert!(s.blocked());
    }

    #[test]
    fn without_share_cap_monopoly_blocks_co_tenant() {
        let limits = WfqLimits { max_inflight_reads: 10, max_tenant_share: 1.0, ..WfqLimits::default() };
        let mut s = CpuScheduler::new(Discipline::Vft, limits);
        for i in 0..20 {
            s.queues.enqueue(i, A, QueueClass::ReadSmall, 1.0, 1.0, 2.0).unwrap();
        }
        while s.dequeue().is_some() {}
        s.queues.enqueue(99, B, QueueClass::ReadSmall, 1.0, 1.0, 2.0).unwrap();
        assert!(s.dequeue().is_none());
        s.complete(A, QueueClass::ReadSmall, 1.0);
        assert_eq!(s.dequeue().unwrap().item, 99);
    }

    #[test]
    fn write_ru_ceiling() {
        let limits = WfqLimits { max_inflight_write_ru: 10.0, ..WfqLimits::default() };
        let mut s = CpuScheduler::new(Discipline::Vft, limits);
        s.queues.enqueue(0, A, QueueClass::WriteSmall, 6.0, 1.0, 2.0).unwrap();
        s.queues.enqueue(1, B, QueueClass::WriteSmall, 6.0, 1.0, 2.0).unwrap();
        s.queues.enqueue(2, B, QueueClass::ReadSmall, 100.0, 1.0, 2.0).unwrap();
        assert_eq!(s.dequeue().unwrap().item, 0);
        // The second write would exceed the ceiling; the read still flows.
        assert_eq!(s.dequeue().unwrap().item, 2);
        assert!(s.dequeue().is_none());
        s.complete(A, QueueClass::WriteSmall, 6.0);
        assert_eq!(s.dequeue().unwrap().item, 1);
    }

    #[test]
    fn weighted_service_ratio() {
        // Saturated tenants with quotas 2:1 and equal costs.
        let mut q = ClassQueues::new(Discipline::Vft);
        let mut served = [0u32; 2];
        for i in 0..200 {
            q.enqueue(0, A, QueueClass::ReadSmall, 1.0, 200.0, 300.0).unwrap();
            q.enqueue(1, B, QueueClass::ReadSmall, 1.0, 100.0, 300.0).unwrap();
            if i >= 10 {
                let e = q.pop_min(|_| true).unwrap();
                served[e.item] += 1;
            }
        }
        for _ in 0..15_000 {
            let e = q.pop_min(|_| true).unwrap();
            served[e.item] += 1;
            q.enqueue(e.item, [A, B][e.item], QueueClass::ReadSmall, 1.0, [200.0, 100.0][e.item], 300.0).unwrap();
        }
        let ratio = f64::from(served[0]) / f64::from(served[1]);
        assert!((ratio - 2.0).abs() <= 0.1, "ratio {ratio}");
    }

    #[test]
    fn extra_thread_for_co_tenant() {
        let mut io = IoScheduler::new(Discipline::Vft, 4, 1);
        for i in 0..8 {
            io.queues.enqueue(i, A, QueueClass::ReadSmall, 1.0, 1.0, 2.0).unwrap();
        }
        let first = io.dispatch();
        assert_eq!(first.len(), 4);
        assert_eq!(io.monopolist(), Some(A));
        io.queues.enqueue(100, B, QueueClass::ReadSmall, 1.0, 1.0, 2.0).unwrap();
        let next = io.dispatch();
        assert_eq!(next.len(), 1);
        assert_eq!(next[0].0, ThreadSlot::Extra(0));
        assert_eq!(next[0].1.item, 100);
        assert_eq!(io.extra_activations(), 1);
    }

    #[test]
    fn no_extra_threads_when_basic_suffice() {
        let mut io = IoScheduler::new(Discipline::Vft, 4, 1);
        for round in 0..50 {
            io.queues.enqueue(round, A, QueueClass::ReadSmall, 1.0, 1.0, 2.0).unwrap();
            io.queues.enqueue(round, B, QueueClass::ReadSmall, 1.0, 1.0, 2.0).unwrap();
            let got = io.dispatch();
            assert_eq!(got.len(), 2);
            for (slot, _) in got {
                io.complete(slot);
            }
        }
        assert_eq!(io.extra_activations(), 0);
        assert!(io.dispatch().is_empty());
    }

    proptest! {
        #[test]
        fn per_tenant_vft_non_decreasing(
            ops in prop::collection::vec((0u32..3, 0.0f64..50.0, 1.0f64..100.0, any::<bool>()), 1..300)
        ) {
            let mut q = ClassQueues::new(Discipline::Vft);
            let mut last = BTreeMap::new();
            for (t, cost, quota, pop) in ops {
                let tenant = TenantId(t);
                let vft = q.enqueue((), tenant, QueueClass::ReadSmall, cost, quota, quota * 3.0).unwrap();
                let prev = last.insert(tenant, vft).unwrap_or(0.0);
                prop_assert!(vft >= prev);
                if pop {
                    q.pop_min(|_| true);
                }
            }
        }

        #[test]
        fn cpu_dispatch_is_work_conserving(
            ops in prop::collection::vec((0u32..3, 0usize..4, 1.0f64..40.0), 1..200),
            completes in prop::collection::vec(any::<bool>(), 200),
        ) {
            let limits = WfqLimits { max_inflight_reads: 6, max_inflight_writes: 3, max_inflight_write_ru: 50.0, max_tenant_share: 0.9 };
            let mut s = CpuScheduler::new(Discipline::Vft, limits);
            let mut inflight = VecDeque::new();
            for ((t, c, cost), done) in ops.into_iter().zip(completes) {
                s.queues.enqueue((), TenantId(t), QueueClass::ALL[c], cost, 1.0, 3.0).unwrap();
                if done {
                    if let Some((tenant, class, cost)) = inflight.pop_front() {
                        s.complete(tenant, class, cost);
                    }
                }
                while let Some(e) = s.dequeue() {
                    inflight.push_back((e.tenant, e.class, e.cost));
                }
                prop_assert!(s.queues.is_empty() || s.blocked());
            }
        }
    }
}
