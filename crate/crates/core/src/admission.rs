//! Two-level request restriction: burstable per-proxy quotas reverted by a
//! periodic meta monitor, and hard per-partition caps at the data node.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{PartitionId, TenantId};

pub const US_PER_SEC: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    ProxyQuotaExceeded,
    PartitionQuotaExceeded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admit,
    Reject(RejectReason),
}

impl Admission {
    pub fn is_admit(self) -> bool {
        matches!(self, Admission::Admit)
    }
}

/// Continuous-refill token bucket over integer microsecond time.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenBucket {
    rate: f64,
    window_us: u64,
    capacity: f64,
    tokens: f64,
    last_us: u64,
}

impl TokenBucket {
    /// A full bucket refilling at `rate` per second, holding `window_us` worth.
    pub fn new(rate: f64, window_us: u64, now_us: u64) -> Self {
        let capacity = rate * window_us as f64 / US_PER_SEC as f64;
        TokenBucket { rate, window_us, capacity, tokens: capacity, last_us: now_us }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn tokens(&self) -> f64 {
        self.tokens
    }

    fn refill(&mut self, now_us: u64) {
        if now_us > self.last_us {
            let dt = (now_us - self.last_us) as f64 / US_PER_SEC as f64;
            self.tokens = (self.tokens + self.rate * dt).min(self.capacity);
            self.last_us = now_us;
        }
    }

    /// Takes `cost` tokens if available. A cost larger than the whole bucket
    /// is admitted from a full bucket and leaves it in debt.
    pub fn try_take(&mut self, cost: f64, now_us: u64) -> bool {
        if cost <= 0.0 {
            return true;
        }
        self.refill(now_us);
        if self.capacity > 0.0 && self.tokens >= cost.min(self.capacity) {
            self.tokens -= cost;
            true
        } else {
            false
        }
    }

    /// Changes the refill rate from `now_us` on; tokens are clipped to the
    /// new capacity.
    pub fn set_rate(&mut self, rate: f64, now_us: u64) {
        self.refill(now_us);
        self.rate = rate;
        self.capacity = rate * self.window_us as f64 / US_PER_SEC as f64;
        self.tokens = self.tokens.min(self.capacity);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdmissionConfig {
    pub bucket_window_us: u64,
    pub burst_multiplier: f64,
    pub partition_cap_multiplier: f64,
    pub meta_poll_period_us: u64,
    pub directive_delay_us: u64,
    /// CPU cost of rejecting a request at a node, relative to the mean
    /// service cost of an admitted one.
    pub reject_cost_fraction: f64,
}

impl Default for AdmissionConfig {
    fn default() -> Self {
        AdmissionConfig {
            bucket_window_us: US_PER_SEC,
            burst_multiplier: 2.0,
            partition_cap_multiplier: 3.0,
            meta_poll_period_us: 5 * US_PER_SEC,
            directive_delay_us: US_PER_SEC,
            reject_cost_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxyState {
    pub proxy_id: u32,
    pub tenant: TenantId,
    proxy_quota: f64,
    burst_mode: bool,
    burst_multiplier: f64,
    bucket: TokenBucket,
}

impl ProxyState {
    pub fn new(proxy_id: u32, tenant: TenantId, proxy_quota: f64, cfg: &AdmissionConfig, now_us: u64) -> Self {
        ProxyState {
            proxy_id,
            tenant,
            proxy_quota,
            burst_mode: true,
            burst_multiplier: cfg.burst_multiplier,
            bucket: TokenBucket::new(proxy_quota * cfg.burst_multiplier, cfg.bucket_window_us, now_us),
        }
    }

    pub fn proxy_quota(&self) -> f64 {
        self.proxy_quota
    }

    pub fn burst_mode(&self) -> bool {
        self.burst_mode
    }

    pub fn bucket(&self) -> &TokenBucket {
        &self.bucket
    }

    /// Currently allowed RU/s.
    pub fn ceiling(&self) -> f64 {
        if self.burst_mode {
            self.proxy_quota * self.burst_multiplier
        } else {
            self.proxy_quota
        }
    }

    pub fn set_burst(&mut self, on: bool, now_us: u64) {
        if self.burst_mode != on {
            self.burst_mode = on;
            self.bucket.set_rate(self.ceiling(), now_us);
        }
    }

    pub fn set_quota(&mut self, proxy_quota: f64, now_us: u64) {
        self.proxy_quota = proxy_quota;
        self.bucket.set_rate(self.ceiling(), now_us);
    }

    /// Debits `request_ru` if the proxy bucket allows it.
    pub fn admit(&mut self, request_ru: f64, now_us: u64) -> Admission {
        if self.bucket.try_take(request_ru, now_us) {
            Admission::Admit
        } else {
            Admission::Reject(RejectReason::ProxyQuotaExceeded)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionGate {
    pub partition: PartitionId,
    partition_quota: f64,
    cap_multiplier: f64,
    bucket: TokenBucket,
}

impl PartitionGate {
    pub fn new(partition: PartitionId, partition_quota: f64, cfg: &AdmissionConfig, now_us: u64) -> Self {
        let rate = partition_quota * cfg.partition_cap_multiplier;
        PartitionGate {
            partition,
            partition_quota,
            cap_multiplier: cfg.partition_cap_multiplier,
            bucket: TokenBucket::new(rate, cfg.bucket_window_us, now_us),
        }
    }

    pub fn partition_quota(&self) -> f64 {
        self.partition_quota
    }

    pub fn bucket(&self) -> &TokenBucket {
        &self.bucket
    }

    pub fn set_quota(&mut self, partition_quota: f64, now_us: u64) {
        self.partition_quota = partition_quota;
        self.bucket.set_rate(partition_quota * self.cap_multiplier, now_us);
    }

    pub fn admit(&mut self, request_ru: f64, now_us: u64) -> Admission {
        if self.bucket.try_take(request_ru, now_us) {
            Admission::Admit
        } else {
            Admission::Reject(RejectReason::PartitionQuotaExceeded)
        }
    }
}

/// Instruction from the meta monitor to every proxy of a tenant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Directive {
    pub tenant: TenantId,
    pub burst_mode: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct TenantWatch {
    quota: f64,
    per_proxy: Vec<f64>,
    reverted: bool,
}

/// Periodically compares each tenant's proxy traffic against its quota.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaMonitor {
    poll_period_us: u64,
    tenants: BTreeMap<TenantId, TenantWatch>,
}

impl MetaMonitor {
    pub fn new(poll_period_us: u64) -> Self {
        assert!(poll_period_us > 0);
        MetaMonitor { poll_period_us, tenants: BTreeMap::new() }
    }

    pub fn poll_period_us(&self) -> u64 {
        self.poll_period_us
    }

    pub fn watch(&mut self, tenant: TenantId, quota: f64, proxies: u32) {
        self.tenants.insert(tenant, TenantWatch { quota, per_proxy: vec![0.0; proxies as usize], reverted: false });
    }

    pub fn set_quota(&mut self, tenant: TenantId, quota: f64) {
        if let Some(w) = self.tenants.get_mut(&tenant) {
            w.quota = quota;
        }
    }

    /// Records RU offered through `proxy` during the current period.
    pub fn record(&mut self, tenant: TenantId, proxy: u32, ru: f64) {
        if let Some(w) = self.tenants.get_mut(&tenant) {
            w.per_proxy[proxy as usize] += ru;
        }
    }

    pub fn is_reverted(&self, tenant: TenantId) -> bool {
        self.tenants.get(&tenant).is_some_and(|w| w.reverted)
    }

    /// Closes the current period. Emits a revert when a tenant's total rate is
    /// strictly above its quota, and a restore after a full compliant period.
    /// Only state changes produce directives.
    pub fn tick(&mut self) -> Vec<Directive> {
        let secs = self.poll_period_us as f64 / US_PER_SEC as f64;
        let mut out = Vec::new();
        for (tenant, w) in &mut self.tenants {
            let rate: f64 = w.per_proxy.iter().sum::<f64>() / secs;
            w.per_proxy.iter_mut().for_each(|v| *v = 0.0);
            let over = rate > w.quota;
            if over != w.reverted {
                w.reverted = over;
                out.push(Directive { tenant: *tenant, burst_mode: !over });
            }
        }
        out
    }
}
