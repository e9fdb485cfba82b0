//! The event loop: arrivals flow proxy -> node CPU -> node I/O -> response,
//! with periodic monitor, autoscaler, rescheduler and load-slot ticks.

use std::collections::BTreeMap;

use log::{debug, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::events::EventQueue;
use super::metrics::{MetricsSink, Terminal};
use super::workload::{stream_seed, ArrivalGen, KeySampler, ValueSize};
use super::SimError;
use crate::admission::{Directive, MetaMonitor, PartitionGate, ProxyState, US_PER_SEC};
use crate::autoscale::{apply, decide, ScalingAction, ScalingState};
use crate::cache::{AuLookup, AuLruCache, AuLruConfig, CacheStats, FanoutRouter, SaLruCache};
use crate::domain::{build_topology, Key, NodeId, PartitionId, RequestKind, TenantId, World, DEFAULT_LARGE_THRESHOLD};
use crate::forecast::{forecast, MetricSeries};
use crate::hash::hash_u64;
use crate::reschedule::{
    execute, intra_pool_reschedule, replica_ru_load, Migration, NodeState, PoolState, PoolStats, ReplicaKey, SLOTS,
};
use crate::ru::{estimate_read_ru, ru_write, settle_read, ReadStats, RuConfig, ServedFrom};
use crate::scenario::{ScenarioConfig, Toggles};
use crate::wfq::{classify, CpuScheduler, Discipline, IoScheduler, QueueClass, ThreadSlot};

/// TTL used when a workload sets none.
const NO_TTL_US: u64 = u64::MAX / 4;
/// Simulated time per forecast sample, whatever the epoch length.
const VIRTUAL_HOUR_US: u64 = 3_600_000_000;

#[derive(Debug, Clone, Copy)]
enum Ev {
    Arrival(u32),
    NodeArrival(u32),
    CpuDone { node: u32, req: Option<u32> },
    IoDone { node: u32, slot: ThreadSlot, req: u32 },
    Respond(u32),
    MetaTick,
    Directive(Directive),
    AutoscaleTick(u64),
    RescheduleTick,
    MigrationDone(usize),
    SlotRoll(u64),
    Refresh { profile: u32, proxy: u32, key: u64 },
    Toggle(usize),
}

#[derive(Debug, Clone)]
struct Req {
    tenant: u32,
    profile: u32,
    key: u64,
    kind: RequestKind,
    size: u64,
    arrival_us: u64,
    est_ru: f64,
    work_ru: f64,
    proxy: u32,
    node: u32,
    partition: u32,
    class: QueueClass,
    quota: f64,
    quota_sum: f64,
    enqueued_us: u64,
    refresh: bool,
    served: Option<Terminal>,
}

struct ProfileRt {
    tenant: u32,
    gen: ArrivalGen,
    rng: ChaCha8Rng,
    keys: KeySampler,
    read_ratio: f64,
    value_size: ValueSize,
    size_seed: u64,
    ttl_us: u64,
}

struct NodeRt {
    cpu: CpuScheduler<u32>,
    io: IoScheduler<u32>,
    idle_cpu: usize,
    reject_backlog: u64,
    cache: SaLruCache,
    busy_cpu_us: u64,
    served_cpu_us: u64,
    served_jobs: u64,
    rejects_processed: u64,
}

impl NodeRt {
    fn mean_cpu_us(&self, fallback: f64) -> f64 {
        if self.served_jobs == 0 {
            fallback
        } else {
            self.served_cpu_us as f64 / self.served_jobs as f64
        }
    }

    fn queued(&self, t: TenantId) -> usize {
        self.cpu.queues.tenant_len(t) + self.io.queues.tenant_len(t)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PartLoad {
    read_ru: f64,
    reads: u64,
    node_hits: u64,
    write_ru: f64,
}

struct TenantRt {
    router: FanoutRouter,
    route_rng: ChaCha8Rng,
    proxies: Vec<ProxyState>,
    caches: Vec<AuLruCache>,
    gates: Vec<PartitionGate>,
    stats: ReadStats,
    load: Vec<PartLoad>,
    arrivals: u64,
    terminals: BTreeMap<Terminal, u64>,
    success: u64,
    timed_out: u64,
    charged_ru: u64,
    cpu_wait_max_us: u64,
    cpu_wait_sum_us: u64,
    cpu_waits: u64,
    refreshes: u64,
    epoch_ru: f64,
    history: Vec<f64>,
    last_scale_us: Option<u64>,
}

/// One entry of `decisions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionRecord {
    Autoscale {
        t_us: u64,
        tenant: String,
        history_hours: usize,
        u_max: f64,
        action: ScalingAction,
        old_tenant_quota: f64,
        new_tenant_quota: f64,
        new_partition_quota: f64,
        partitions: u32,
        split: bool,
    },
    Meta {
        t_us: u64,
        tenant: String,
        burst_mode: bool,
    },
}

/// One entry of `migrations.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationRecord {
    pub start_us: u64,
    pub done_us: u64,
    /// False when the replica had already moved or vanished in a split.
    pub applied: bool,
    #[serde(flatten)]
    pub migration: Migration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescheduleTickRecord {
    pub t_us: u64,
    pub pool: String,
    pub moves: usize,
    pub before: PoolStats,
    pub planned_after: PoolStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TenantSummary {
    pub name: String,
    pub arrivals: u64,
    pub terminals: BTreeMap<Terminal, u64>,
    pub success: u64,
    pub timed_out: u64,
    pub charged_ru: u64,
    pub p50_us: Option<u32>,
    pub p99_us: Option<u32>,
    pub max_cpu_wait_us: u64,
    pub mean_cpu_wait_us: f64,
    pub refreshes: u64,
    pub proxy_cache: CacheStats,
    pub final_ru_quota: f64,
    pub final_partition_quota: f64,
    pub final_partitions: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub name: String,
    pub cpu_busy_us: u64,
    pub rejects_processed: u64,
    pub extra_io_activations: u64,
    pub node_cache: CacheStats,
    pub replicas: usize,
}

/// Time-averaged population against arrival rate times mean sojourn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LittleCheck {
    pub mean_in_system: f64,
    pub arrival_rate: f64,
    pub mean_sojourn_s: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub duration_s: f64,
    pub end_us: u64,
    pub events: u64,
    pub tenants: Vec<TenantSummary>,
    pub nodes: Vec<NodeSummary>,
    pub conservation_ok: bool,
    pub conservation_issues: Vec<String>,
    pub littles_law: LittleCheck,
    pub reschedule_ticks: Vec<RescheduleTickRecord>,
    pub migrations: usize,
    pub autoscale_actions: usize,
}

pub struct RunOutput {
    pub summary: RunSummary,
    pub metrics: MetricsSink,
    pub decisions: Vec<DecisionRecord>,
    pub migrations: Vec<MigrationRecord>,
    pub world: World,
}

impl RunOutput {
    pub fn tenant_index(&self, name: &str) -> Option<usize> {
        self.summary.tenants.iter().position(|t| t.name == name)
    }

    pub fn tenant(&self, name: &str) -> Option<&TenantSummary> {
        self.summary.tenants.iter().find(|t| t.name == name)
    }

    /// Writes metrics.csv, summary.json, decisions.jsonl and migrations.jsonl.
    pub fn write_to(&self, dir: &std::path::Path) -> std::io::Result<()> {
        use std::io::Write;
        std::fs::create_dir_all(dir)?;
        let f = std::fs::File::create(dir.join("metrics.csv"))?;
        self.metrics.write_csv(std::io::BufWriter::new(f)).map_err(std::io::Error::other)?;
        let summary = serde_json::to_string_pretty(&self.summary).map_err(std::io::Error::other)?;
        std::fs::write(dir.join("summary.json"), summary + "\n")?;
        let mut d = std::io::BufWriter::new(std::fs::File::create(dir.join("decisions.jsonl"))?);
        for r in &self.decisions {
            serde_json::to_writer(&mut d, r).map_err(std::io::Error::other)?;
            d.write_all(b"\n")?;
        }
        d.flush()?;
        let mut m = std::io::BufWriter::new(std::fs::File::create(dir.join("migrations.jsonl"))?);
        for r in &self.migrations {
            serde_json::to_writer(&mut m, r).map_err(std::io::Error::other)?;
            m.write_all(b"\n")?;
        }
        m.flush()
    }
}

struct PendingMigration {
    replica: crate::domain::ReplicaId,
    src: NodeId,
    dst: NodeId,
    record: usize,
}

pub(super) struct Simulation<'a> {
    cfg: &'a ScenarioConfig,
    world: World,
    ru: RuConfig,
    toggles: Toggles,
    horizon_us: u64,
    timeout_us: u64,
    q: EventQueue<Ev>,
    reqs: Vec<Option<Req>>,
    free: Vec<u32>,
    profiles: Vec<ProfileRt>,
    nodes: Vec<NodeRt>,
    quota_sums: Vec<f64>,
    quota_sums_dirty: bool,
    tenants: Vec<TenantRt>,
    meta: MetaMonitor,
    metrics: MetricsSink,
    decisions: Vec<DecisionRecord>,
    migrations: Vec<MigrationRecord>,
    pending: Vec<PendingMigration>,
    pending_left: usize,
    ticks: Vec<RescheduleTickRecord>,
    live: u64,
    area_us: f64,
    last_t: u64,
    sojourn_sum_us: f64,
    events: u64,
}

impl<'a> Simulation<'a> {
    pub(super) fn new(cfg: &'a ScenarioConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let world = build_topology(&cfg.topology)?;
        let p = &cfg.params;
        let ru = RuConfig {
            unit_size: p.ru.unit_size,
            replica_count: world.replica_count,
            window_k: p.ru.window_k,
            cold_start_ru: p.ru.cold_start_ru,
        };
        let discipline = if cfg.toggles.wfq { Discipline::Vft } else { Discipline::Fifo };
        let half_life_us = (p.cache.node_hit_half_life_s * 1e6) as u64;
        let nodes = world
            .nodes
            .iter()
            .map(|_| NodeRt {
                cpu: CpuScheduler::new(discipline, p.wfq),
                io: IoScheduler::new(discipline, p.service.io_threads, p.service.extra_threads()),
                idle_cpu: p.service.cpu_threads,
                reject_backlog: 0,
                cache: SaLruCache::with_half_life(p.cache.node_cache_bytes, half_life_us.max(1)),
                busy_cpu_us: 0,
                served_cpu_us: 0,
                served_jobs: 0,
                rejects_processed: 0,
            })
            .collect();
        let au = AuLruConfig {
            capacity_bytes: p.cache.proxy_cache_bytes,
            refresh_window_us: (p.cache.refresh_window_s * 1e6) as u64,
            hot_threshold: p.cache.hot_threshold,
            active_refresh: p.cache.active_refresh,
        };
        let mut meta = MetaMonitor::new(p.admission.meta_poll_period_us);
        let mut tenants = Vec::new();
        for (i, t) in world.tenants.iter().enumerate() {
            meta.watch(t.id, t.ru_quota, t.proxy_count);
            let router = FanoutRouter::new(t.proxy_count, t.proxy_group_count, hash_u64(world.hash_seed, i as u64))
                .map_err(|e| SimError::Config(format!("tenant {}: {e}", t.name)))?;
            let history =
                cfg.autoscale.histories.iter().filter(|h| h.tenant == t.name).flat_map(|h| h.series()).collect();
            tenants.push(TenantRt {
                router,
                route_rng: ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, i as u64, 10)),
                proxies: (0..t.proxy_count)
                    .map(|k| ProxyState::new(k, t.id, t.proxy_quota(), &p.admission, 0))
                    .collect(),
                caches: (0..t.proxy_count).map(|_| AuLruCache::new(au)).collect(),
                gates: world
                    .partitions(t.id)
                    .iter()
                    .map(|pt| PartitionGate::new(pt.id, pt.quota, &p.admission, 0))
                    .collect(),
                stats: ReadStats::new(ru.window_k),
                load: vec![PartLoad::default(); t.partition_count as usize],
                arrivals: 0,
                terminals: Terminal::ALL.iter().map(|t| (*t, 0)).collect(),
                success: 0,
                timed_out: 0,
                charged_ru: 0,
                cpu_wait_max_us: 0,
                cpu_wait_sum_us: 0,
                cpu_waits: 0,
                refreshes: 0,
                epoch_ru: 0.0,
                history,
                last_scale_us: None,
            });
        }
        let horizon_us = cfg.duration_us();
        let mut profiles = Vec::new();
        for (i, w) in cfg.workloads.iter().enumerate() {
            let tenant = world.tenant_by_name(&w.tenant)?.0;
            let i = i as u64;
            profiles.push(ProfileRt {
                tenant,
                gen: ArrivalGen::new(w.arrival, horizon_us, stream_seed(cfg.seed, i, 1)),
                rng: ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, i, 2)),
                keys: KeySampler::new(w.keys),
                read_ratio: w.read_ratio,
                value_size: w.value_size,
                size_seed: stream_seed(cfg.seed, i, 3),
                ttl_us: w.ttl_s.map_or(NO_TTL_US, |s| (s * 1e6).round() as u64),
            });
        }
        let names = world.tenants.iter().map(|t| t.name.clone()).collect();
        let quota_sums = vec![0.0; world.nodes.len()];
        Ok(Simulation {
            cfg,
            world,
            ru,
            toggles: cfg.toggles,
            horizon_us,
            timeout_us: (p.client_timeout_ms * 1000.0).round() as u64,
            q: EventQueue::new(),
            reqs: Vec::new(),
            free: Vec::new(),
            profiles,
            nodes,
            quota_sums,
            quota_sums_dirty: true,
            tenants,
            meta,
            metrics: MetricsSink::new(names),
            decisions: Vec::new(),
            migrations: Vec::new(),
            pending: Vec::new(),
            pending_left: 0,
            ticks: Vec::new(),
            live: 0,
            area_us: 0.0,
            last_t: 0,
            sojourn_sum_us: 0.0,
            events: 0,
        })
    }

    fn epoch_us(&self) -> u64 {
        ((self.cfg.autoscale.epoch_s * 1e6).round() as u64).max(1)
    }

    fn slot_us(&self) -> u64 {
        ((self.cfg.params.load_slot_s * 1e6).round() as u64).max(1)
    }

    /// Schedules a periodic event only while the run is still open.
    fn periodic(&mut self, at: u64, ev: Ev) {
        if at < self.horizon_us {
            self.q.push(at, ev);
        }
    }

    pub(super) fn run(mut self) -> Result<RunOutput, SimError> {
        for p in 0..self.profiles.len() {
            if let Some(t) = self.profiles[p].gen.next_arrival() {
                self.q.push(t, Ev::Arrival(p as u32));
            }
        }
        let p = &self.cfg.params;
        self.periodic(p.admission.meta_poll_period_us, Ev::MetaTick);
        self.periodic(0, Ev::AutoscaleTick(0));
        self.periodic(p.reschedule.tick_us, Ev::RescheduleTick);
        self.periodic(self.slot_us(), Ev::SlotRoll(0));
        for (i, c) in self.cfg.toggle_changes.iter().enumerate() {
            self.q.push((c.at_s * 1e6).round() as u64, Ev::Toggle(i));
        }
        info!("running {} for {} s", self.cfg.name, self.cfg.duration_s);
        while let Some((now, ev)) = self.q.pop() {
            self.advance(now);
            self.events += 1;
            self.handle(now, ev)?;
        }
        if self.live > 0 {
            return Err(SimError::Stalled { live: self.live, at_us: self.q.now_us() });
        }
        self.finish()
    }

    fn advance(&mut self, now: u64) {
        let to = now.min(self.horizon_us);
        if to > self.last_t {
            self.area_us += self.live as f64 * (to - self.last_t) as f64;
            self.last_t = to;
        }
    }

    fn handle(&mut self, now: u64, ev: Ev) -> Result<(), SimError> {
        match ev {
            Ev::Arrival(p) => self.on_arrival(now, p),
            Ev::NodeArrival(r) => self.on_node_arrival(now, r)?,
            Ev::CpuDone { node, req } => self.on_cpu_done(now, node, req)?,
            Ev::IoDone { node, slot, req } => self.on_io_done(now, node, slot, req),
            Ev::Respond(r) => self.on_respond(now, r),
            Ev::MetaTick => {
                for d in self.meta.tick() {
                    self.decisions.push(DecisionRecord::Meta {
                        t_us: now,
                        tenant: self.world.tenant(d.tenant).name.clone(),
                        burst_mode: d.burst_mode,
                    });
                    self.q.push(now + self.cfg.params.admission.directive_delay_us, Ev::Directive(d));
                }
                self.periodic(now + self.meta.poll_period_us(), Ev::MetaTick);
            }
            Ev::Directive(d) => {
                for p in &mut self.tenants[d.tenant.0 as usize].proxies {
                    p.set_burst(d.burst_mode, now);
                }
            }
            Ev::AutoscaleTick(k) => {
                self.on_autoscale(now, k);
                let next = (k + 1) * self.epoch_us();
                self.periodic(next, Ev::AutoscaleTick(k + 1));
            }
            Ev::RescheduleTick => {
                self.on_reschedule(now);
                self.periodic(now + self.cfg.params.reschedule.tick_us, Ev::RescheduleTick);
            }
            Ev::MigrationDone(i) => self.on_migration_done(now, i),
            Ev::SlotRoll(k) => {
                self.on_slot_roll(k);
                let next = (k + 2) * self.slot_us();
                self.periodic(next, Ev::SlotRoll(k + 1));
            }
            Ev::Refresh { profile, proxy, key } => self.on_refresh(now, profile, proxy, key),
            Ev::Toggle(i) => {
                let c = self.cfg.toggle_changes[i];
                info!("t={} s: {:?} -> {}", now / US_PER_SEC, c.toggle, c.enabled);
                self.toggles.set(c.toggle, c.enabled);
            }
        }
        Ok(())
    }

    fn alloc(&mut self, r: Req) -> u32 {
        match self.free.pop() {
            Some(i) => {
                self.reqs[i as usize] = Some(r);
                i
            }
            None => {
                self.reqs.push(Some(r));
                (self.reqs.len() - 1) as u32
            }
        }
    }

    fn req(&self, r: u32) -> &Req {
        self.reqs[r as usize].as_ref().expect("live request")
    }

    fn req_mut(&mut self, r: u32) -> &mut Req {
        self.reqs[r as usize].as_mut().expect("live request")
    }

    fn release(&mut self, r: u32) -> Req {
        self.free.push(r);
        self.reqs[r as usize].take().expect("live request")
    }

    /// Closes a client request.
    fn terminate(&mut self, now: u64, req: &Req, terminal: Terminal, charged: u64) {
        let t = req.tenant as usize;
        let latency = now - req.arrival_us;
        let second = req.arrival_us / US_PER_SEC;
        let timed_out = terminal.is_served() && latency > self.timeout_us;
        let tr = &mut self.tenants[t];
        *tr.terminals.entry(terminal).or_insert(0) += 1;
        tr.charged_ru += charged;
        if terminal.is_served() {
            if timed_out {
                tr.timed_out += 1;
            } else {
                tr.success += 1;
            }
        }
        self.metrics.update(second, t, |c| {
            match terminal {
                Terminal::ProxyReject => c.rejected_proxy_quota += 1,
                Terminal::PartitionReject => c.rejected_partition_quota += 1,
                Terminal::QueueFull => c.rejected_queue_full += 1,
                Terminal::ProxyCache => c.proxy_cache_hits += 1,
                Terminal::NodeCache => c.node_cache_hits += 1,
                Terminal::Disk => c.disk_served += 1,
            }
            if terminal.is_served() {
                if timed_out {
                    c.timed_out += 1;
                } else {
                    c.success += 1;
                }
            }
            c.charged_ru += charged;
        });
        if terminal.is_served() {
            self.metrics.latency(second, t, latency);
        }
        self.sojourn_sum_us += latency as f64;
        self.live -= 1;
    }

    fn on_arrival(&mut self, now: u64, p: u32) {
        let pr = &mut self.profiles[p as usize];
        if let Some(next) = pr.gen.next_arrival() {
            self.q.push(next, Ev::Arrival(p));
        }
        let key = pr.keys.sample(&mut pr.rng);
        let is_read = pr.rng.random::<f64>() < pr.read_ratio;
        let size = pr.value_size.size_of(pr.size_seed, key);
        let t = pr.tenant;
        let tenant = TenantId(t);
        self.live += 1;
        self.metrics.update(now / US_PER_SEC, t as usize, |c| c.offered += 1);
        let tr = &mut self.tenants[t as usize];
        tr.arrivals += 1;
        let proxy = tr.router.route(key, &mut tr.route_rng);
        let kind = if is_read { RequestKind::Get } else { RequestKind::Put };
        let mut req = Req {
            tenant: t,
            profile: p,
            key,
            kind,
            size,
            arrival_us: now,
            est_ru: 0.0,
            work_ru: 0.0,
            proxy,
            node: 0,
            partition: 0,
            class: QueueClass::ReadSmall,
            quota: 0.0,
            quota_sum: 0.0,
            enqueued_us: now,
            refresh: false,
            served: None,
        };
        if is_read && self.toggles.proxy_cache {
            if let AuLookup::Hit { size: cached, schedule_refresh } = tr.caches[proxy as usize].get(key, now) {
                tr.stats.update(cached, true);
                if schedule_refresh {
                    self.q.push(now, Ev::Refresh { profile: p, proxy, key });
                }
                req.size = cached;
                req.served = Some(Terminal::ProxyCache);
                let r = self.alloc(req);
                self.q.push(now + self.cfg.params.service.proxy_hit_us, Ev::Respond(r));
                return;
            }
        }
        let est = if is_read { estimate_read_ru(&tr.stats, &self.ru) } else { ru_write(size, &self.ru) as f64 };
        req.est_ru = est;
        self.meta.record(tenant, proxy, est);
        tr.epoch_ru += est;
        if self.toggles.proxy_quota && !tr.proxies[proxy as usize].admit(est, now).is_admit() {
            self.terminate(now, &req, Terminal::ProxyReject, 0);
            return;
        }
        if !is_read {
            // Other proxies keep serving their copy until its TTL runs out.
            tr.caches[proxy as usize].invalidate(key);
        }
        let r = self.alloc(req);
        self.q.push(now + self.cfg.params.service.network_us, Ev::NodeArrival(r));
    }

    fn on_refresh(&mut self, now: u64, profile: u32, proxy: u32, key: u64) {
        let pr = &self.profiles[profile as usize];
        let t = pr.tenant;
        let size = pr.value_size.size_of(pr.size_seed, key);
        let est = estimate_read_ru(&self.tenants[t as usize].stats, &self.ru);
        let req = Req {
            tenant: t,
            profile,
            key,
            kind: RequestKind::Get,
            size,
            arrival_us: now,
            est_ru: est,
            work_ru: 0.0,
            proxy,
            node: 0,
            partition: 0,
            class: QueueClass::ReadSmall,
            quota: 0.0,
            quota_sum: 0.0,
            enqueued_us: now,
            refresh: true,
            served: None,
        };
        let r = self.alloc(req);
        self.q.push(now + self.cfg.params.service.network_us, Ev::NodeArrival(r));
    }

    fn quota_sum(&mut self, node: NodeId) -> f64 {
        if self.quota_sums_dirty {
            for (i, s) in self.quota_sums.iter_mut().enumerate() {
                *s = self.world.node_quota_sum(NodeId(i as u32));
            }
            self.quota_sums_dirty = false;
        }
        self.quota_sums[node.0 as usize]
    }

    fn on_node_arrival(&mut self, now: u64, r: u32) -> Result<(), SimError> {
        let (t, key, kind, size, est, refresh) = {
            let q = self.req(r);
            (q.tenant, q.key, q.kind, q.size, q.est_ru, q.refresh)
        };
        let tenant = TenantId(t);
        let part = self.world.partition_of(tenant, Key(key));
        let pid = part.id;
        let quota = part.quota;
        let node = part.primary().node;
        if !refresh {
            if self.toggles.partition_quota
                && !self.tenants[t as usize].gates[pid.index as usize].admit(est, now).is_admit()
            {
                self.nodes[node.0 as usize].reject_backlog += 1;
                self.dispatch_cpu(now, node.0);
                let req = self.release(r);
                self.terminate(now, &req, Terminal::PartitionReject, 0);
                return Ok(());
            }
            if self.nodes[node.0 as usize].queued(tenant) >= self.cfg.params.queue_cap_per_tenant {
                let req = self.release(r);
                self.terminate(now, &req, Terminal::QueueFull, 0);
                return Ok(());
            }
        }
        let units = self.ru.units(size) as f64;
        let work = if kind.is_write() { ru_write(size, &self.ru) as f64 } else { units };
        let load = &mut self.tenants[t as usize].load[pid.index as usize];
        if kind.is_write() {
            load.write_ru += units;
        } else {
            load.read_ru += units;
            load.reads += 1;
        }
        let payload = if kind.is_write() {
            size as f64
        } else {
            let s = &self.tenants[t as usize].stats;
            if s.is_empty() {
                0.0
            } else {
                s.expected_size()
            }
        };
        let class = classify(kind, payload, DEFAULT_LARGE_THRESHOLD);
        let sum = self.quota_sum(node).max(quota);
        let q = self.req_mut(r);
        q.work_ru = work;
        q.node = node.0;
        q.partition = pid.index;
        q.class = class;
        q.quota = quota;
        q.quota_sum = sum;
        q.enqueued_us = now;
        self.nodes[node.0 as usize].cpu.queues.enqueue(r, tenant, class, est, quota, sum)?;
        self.dispatch_cpu(now, node.0);
        Ok(())
    }

    fn dispatch_cpu(&mut self, now: u64, node: u32) {
        let fallback = self.cfg.params.service.cpu_us_per_ru;
        let frac = self.cfg.params.admission.reject_cost_fraction;
        loop {
            let n = &mut self.nodes[node as usize];
            if n.idle_cpu == 0 {
                return;
            }
            if n.reject_backlog > 0 {
                n.reject_backlog -= 1;
                n.idle_cpu -= 1;
                n.rejects_processed += 1;
                let dur = ((frac * n.mean_cpu_us(fallback)).round() as u64).max(1);
                n.busy_cpu_us += dur;
                self.q.push(now + dur, Ev::CpuDone { node, req: None });
                continue;
            }
            let Some(e) = n.cpu.dequeue() else { return };
            n.idle_cpu -= 1;
            let r = e.item;
            let req = self.reqs[r as usize].as_ref().expect("queued request");
            let dur = self.cfg.params.service.cpu_us(req.work_ru);
            let n = &mut self.nodes[node as usize];
            n.busy_cpu_us += dur;
            n.served_cpu_us += dur;
            n.served_jobs += 1;
            if !req.refresh {
                let wait = now - req.enqueued_us;
                let tr = &mut self.tenants[req.tenant as usize];
                tr.cpu_wait_max_us = tr.cpu_wait_max_us.max(wait);
                tr.cpu_wait_sum_us += wait;
                tr.cpu_waits += 1;
            }
            self.q.push(now + dur, Ev::CpuDone { node, req: Some(r) });
        }
    }

    fn dispatch_io(&mut self, now: u64, node: u32) {
        let started = self.nodes[node as usize].io.dispatch();
        for (slot, e) in started {
            let dur = self.cfg.params.service.io_us(e.cost as u64);
            self.q.push(now + dur, Ev::IoDone { node, slot, req: e.item });
        }
    }

    fn node_cache_key(tenant: u32, key: u64) -> u64 {
        hash_u64(u64::from(tenant), key)
    }

    fn on_cpu_done(&mut self, now: u64, node: u32, r: Option<u32>) -> Result<(), SimError> {
        self.nodes[node as usize].idle_cpu += 1;
        if let Some(r) = r {
            let q = self.req(r).clone();
            let ck = Self::node_cache_key(q.tenant, q.key);
            let n = &mut self.nodes[node as usize];
            let hit = !q.kind.is_write() && self.toggles.node_cache && n.cache.get(ck, now).is_some();
            if hit {
                n.cpu.complete(TenantId(q.tenant), q.class, q.est_ru);
                if let Some(l) = self.tenants[q.tenant as usize].load.get_mut(q.partition as usize) {
                    l.node_hits += 1;
                }
                self.req_mut(r).served = Some(Terminal::NodeCache);
                self.q.push(now + self.cfg.params.service.network_us, Ev::Respond(r));
            } else {
                let iops = self.cfg.params.service.iops(q.size);
                n.io.queues.enqueue(r, TenantId(q.tenant), q.class, iops as f64, q.quota, q.quota_sum)?;
                self.dispatch_io(now, node);
            }
        }
        self.dispatch_cpu(now, node);
        Ok(())
    }

    fn on_io_done(&mut self, now: u64, node: u32, slot: ThreadSlot, r: u32) {
        let q = self.req(r).clone();
        let n = &mut self.nodes[node as usize];
        n.io.complete(slot);
        n.cpu.complete(TenantId(q.tenant), q.class, q.est_ru);
        if self.toggles.node_cache {
            let _ = n.cache.put(Self::node_cache_key(q.tenant, q.key), q.size, now);
        }
        self.req_mut(r).served = Some(Terminal::Disk);
        self.q.push(now + self.cfg.params.service.network_us, Ev::Respond(r));
        self.dispatch_io(now, node);
        self.dispatch_cpu(now, node);
    }

    fn on_respond(&mut self, now: u64, r: u32) {
        let req = self.release(r);
        let ttl = self.profiles[req.profile as usize].ttl_us;
        let tr = &mut self.tenants[req.tenant as usize];
        if req.refresh {
            tr.refreshes += 1;
            if self.toggles.proxy_cache {
                tr.caches[req.proxy as usize].complete_refresh(req.key, req.size, ttl, now);
            }
            return;
        }
        let terminal = req.served.expect("served request");
        let charged = if req.kind.is_write() {
            ru_write(req.size, &self.ru)
        } else {
            let from = match terminal {
                Terminal::ProxyCache => ServedFrom::ProxyCache,
                Terminal::NodeCache => ServedFrom::NodeCache,
                _ => ServedFrom::Disk,
            };
            settle_read(req.size, from, &self.ru)
        };
        if !req.kind.is_write() && terminal != Terminal::ProxyCache {
            tr.stats.update(req.size, false);
            if self.toggles.proxy_cache {
                tr.caches[req.proxy as usize].put(req.key, req.size, ttl, now);
            }
        }
        self.terminate(now, &req, terminal, charged);
    }

    fn on_autoscale(&mut self, now: u64, k: u64) {
        let epoch_s = self.cfg.autoscale.epoch_s;
        for t in 0..self.tenants.len() {
            let tr = &mut self.tenants[t];
            if k > 0 {
                tr.history.push(tr.epoch_ru / epoch_s);
            }
            tr.epoch_ru = 0.0;
            if !self.toggles.autoscaler || tr.history.is_empty() {
                continue;
            }
            let series = MetricSeries::new(0, tr.history.clone());
            let fr = match forecast(&series, None, &self.cfg.params.forecast) {
                Ok(f) => f,
                Err(e) => {
                    warn!("forecast for tenant {t} failed: {e}");
                    continue;
                }
            };
            let virtual_now = tr.history.len() as u64 * VIRTUAL_HOUR_US;
            let tenant = TenantId(t as u32);
            let state = ScalingState::of(&self.world, tenant, tr.last_scale_us);
            let d = decide(&state, fr.u_max, virtual_now, &self.cfg.params.autoscale);
            self.decisions.push(DecisionRecord::Autoscale {
                t_us: now,
                tenant: self.world.tenant(tenant).name.clone(),
                history_hours: tr.history.len(),
                u_max: fr.u_max,
                action: d.action,
                old_tenant_quota: state.tenant_quota,
                new_tenant_quota: d.new_tenant_quota,
                new_partition_quota: d.new_partition_quota,
                partitions: d.new_partitions,
                split: d.split,
            });
            if !apply(&mut self.world, &d) {
                continue;
            }
            debug!("tenant {t}: {:?} to {:.1} RU/s", d.action, d.new_tenant_quota);
            self.tenants[t].last_scale_us = Some(virtual_now);
            self.refresh_tenant(now, tenant, d.split);
        }
    }

    /// Pushes new quotas from the world into the runtime limiters.
    fn refresh_tenant(&mut self, now: u64, tenant: TenantId, split: bool) {
        let t = self.world.tenant(tenant).clone();
        let adm = self.cfg.params.admission;
        let tr = &mut self.tenants[tenant.0 as usize];
        for p in &mut tr.proxies {
            p.set_quota(t.proxy_quota(), now);
        }
        self.meta.set_quota(tenant, t.ru_quota);
        if split {
            tr.gates =
                self.world.partitions(tenant).iter().map(|p| PartitionGate::new(p.id, p.quota, &adm, now)).collect();
            tr.load = vec![PartLoad::default(); t.partition_count as usize];
        } else {
            for g in &mut tr.gates {
                g.set_quota(t.partition_quota, now);
            }
        }
        self.quota_sums_dirty = true;
    }

    fn on_slot_roll(&mut self, k: u64) {
        let slot = (k as usize) % SLOTS;
        let secs = self.cfg.params.load_slot_s;
        let rc = self.cfg.params.reschedule;
        for t in 0..self.tenants.len() {
            let tenant = TenantId(t as u32);
            let loads = std::mem::take(&mut self.tenants[t].load);
            for (i, l) in loads.iter().enumerate() {
                let hit = if l.reads == 0 { 0.0 } else { l.node_hits as f64 / l.reads as f64 };
                let primary = replica_ru_load(l.read_ru / secs, hit, l.write_ru / secs, &rc);
                let secondary = replica_ru_load(0.0, 0.0, l.write_ru / secs, &rc);
                let part = self.world.partition_mut(PartitionId { tenant, index: i as u32 });
                for rep in &mut part.replicas {
                    rep.ru_load.0[slot] = if rep.id.ordinal == 0 { primary } else { secondary };
                }
            }
            self.tenants[t].load = vec![PartLoad::default(); loads.len()];
        }
    }

    fn pool_state(&self, pool: usize) -> PoolState {
        let rp = &self.world.pools[pool];
        let nodes = rp
            .nodes
            .iter()
            .map(|n| {
                let d = self.world.node(*n);
                let mut s = NodeState::new(n.0, d.ru_capacity, d.storage_capacity);
                s.migrating = d.is_migrating;
                s
            })
            .collect();
        let mut ps = PoolState::new(rp.name.clone(), nodes);
        for t in self.world.tenants.iter().filter(|t| t.pool == rp.id) {
            for p in self.world.partitions(t.id) {
                for r in &p.replicas {
                    let idx = rp.nodes.iter().position(|n| *n == r.node).expect("replica inside its pool");
                    let key = ReplicaKey { tenant: t.id.0, partition: p.id.index, ordinal: r.id.ordinal };
                    ps.add_replica(key, idx, r.ru_load, r.storage_load);
                }
            }
        }
        ps
    }

    fn on_reschedule(&mut self, now: u64) {
        if !self.toggles.rescheduler || !self.pending.is_empty() {
            return;
        }
        let cfg = self.cfg.params.reschedule;
        for pool in 0..self.world.pools.len() {
            let mut ps = self.pool_state(pool);
            let before = ps.stats();
            let plan = intra_pool_reschedule(&mut ps.clone(), &cfg);
            execute(&mut ps, &plan);
            self.ticks.push(RescheduleTickRecord {
                t_us: now,
                pool: ps.name.clone(),
                moves: plan.len(),
                before,
                planned_after: ps.stats(),
            });
            for m in plan {
                let replica = crate::domain::ReplicaId {
                    partition: PartitionId { tenant: TenantId(m.replica.tenant), index: m.replica.partition },
                    ordinal: m.replica.ordinal,
                };
                let dur = ((m.bytes / cfg.migration_bandwidth) * 1e6).ceil() as u64;
                let (src, dst) = (NodeId(m.src), NodeId(m.dst));
                self.world.node_mut(src).is_migrating = true;
                self.world.node_mut(dst).is_migrating = true;
                self.migrations.push(MigrationRecord {
                    start_us: now,
                    done_us: now + dur,
                    applied: false,
                    migration: m,
                });
                let idx = self.pending.len();
                self.pending.push(PendingMigration { replica, src, dst, record: self.migrations.len() - 1 });
                self.pending_left += 1;
                self.q.push(now + dur, Ev::MigrationDone(idx));
            }
        }
    }

    fn on_migration_done(&mut self, now: u64, i: usize) {
        let pm = &self.pending[i];
        let (replica, src, dst, record) = (pm.replica, pm.src, pm.dst, pm.record);
        let tenant = replica.partition.tenant;
        let still_there = (replica.partition.index as usize) < self.world.partitions(tenant).len()
            && self
                .world
                .partition(replica.partition)
                .replicas
                .get(replica.ordinal as usize)
                .is_some_and(|r| r.node == src);
        if still_there {
            self.world.move_replica(replica, dst);
            self.quota_sums_dirty = true;
        }
        self.migrations[record].applied = still_there;
        self.migrations[record].done_us = now;
        self.pending_left -= 1;
        if self.pending_left == 0 {
            for p in std::mem::take(&mut self.pending) {
                self.world.node_mut(p.src).is_migrating = false;
                self.world.node_mut(p.dst).is_migrating = false;
            }
        }
    }

    fn finish(self) -> Result<RunOutput, SimError> {
        let mut issues = Vec::new();
        let mut tenants = Vec::new();
        for (i, tr) in self.tenants.iter().enumerate() {
            let t = &self.world.tenants[i];
            let term: u64 = tr.terminals.values().sum();
            let totals = self.metrics.totals(i);
            if term != tr.arrivals {
                issues.push(format!("{}: {} arrivals but {} terminals", t.name, tr.arrivals, term));
            }
            if totals.offered != tr.arrivals || totals.terminated() != totals.offered {
                issues.push(format!(
                    "{}: metrics offered {} terminated {} vs {} arrivals",
                    t.name,
                    totals.offered,
                    totals.terminated(),
                    tr.arrivals
                ));
            }
            let served: u64 = tr.terminals.iter().filter(|(k, _)| k.is_served()).map(|(_, v)| v).sum();
            if served != tr.success + tr.timed_out {
                issues.push(format!("{}: served {} != success + timed out", t.name, served));
            }
            let lat = self.metrics.latencies(i, 0, self.metrics.seconds());
            let mut cache = CacheStats::default();
            for c in &tr.caches {
                cache.add(&c.stats);
            }
            tenants.push(TenantSummary {
                name: t.name.clone(),
                arrivals: tr.arrivals,
                terminals: tr.terminals.clone(),
                success: tr.success,
                timed_out: tr.timed_out,
                charged_ru: tr.charged_ru,
                p50_us: super::metrics::percentile(&lat, 0.5),
                p99_us: super::metrics::percentile(&lat, 0.99),
                max_cpu_wait_us: tr.cpu_wait_max_us,
                mean_cpu_wait_us: if tr.cpu_waits == 0 { 0.0 } else { tr.cpu_wait_sum_us as f64 / tr.cpu_waits as f64 },
                refreshes: tr.refreshes,
                proxy_cache: cache,
                final_ru_quota: t.ru_quota,
                final_partition_quota: t.partition_quota,
                final_partitions: t.partition_count,
            });
        }
        let nodes = self
            .nodes
            .iter()
            .zip(&self.world.nodes)
            .map(|(n, d)| NodeSummary {
                name: d.name.clone(),
                cpu_busy_us: n.busy_cpu_us,
                rejects_processed: n.rejects_processed,
                extra_io_activations: n.io.extra_activations(),
                node_cache: n.cache.stats,
                replicas: d.replicas.len(),
            })
            .collect();
        let arrivals: u64 = self.tenants.iter().map(|t| t.arrivals).sum();
        let span_s = self.horizon_us as f64 / 1e6;
        let mean_in_system = self.area_us / self.horizon_us as f64;
        let arrival_rate = arrivals as f64 / span_s;
        let mean_sojourn_s = if arrivals == 0 { 0.0 } else { self.sojourn_sum_us / arrivals as f64 / 1e6 };
        let expected = arrival_rate * mean_sojourn_s;
        let relative_error = if expected > 0.0 { (mean_in_system - expected).abs() / expected } else { 0.0 };
        let autoscale_actions = self
            .decisions
            .iter()
            .filter(|d| matches!(d, DecisionRecord::Autoscale { action, .. } if *action != ScalingAction::None))
            .count();
        let summary = RunSummary {
            scenario: self.cfg.name.clone(),
            seed: self.cfg.seed,
            duration_s: self.cfg.duration_s,
            end_us: self.q.now_us(),
            events: self.events,
            tenants,
            nodes,
            conservation_ok: issues.is_empty(),
            conservation_issues: issues.clone(),
            littles_law: LittleCheck { mean_in_system, arrival_rate, mean_sojourn_s, relative_error },
            reschedule_ticks: self.ticks,
            migrations: self.migrations.len(),
            autoscale_actions,
        };
        if !issues.is_empty() {
            return Err(SimError::Conservation(issues));
        }
        Ok(RunOutput {
            summary,
            metrics: self.metrics,
            decisions: self.decisions,
            migrations: self.migrations,
            world: self.world,
        })
    }
}
