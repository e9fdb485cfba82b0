//! Per-tenant, per-second counters and latency samples.
//!
//! Every request is attributed to the second it arrived in, so each row
//! satisfies `offered = success + rejected_* + timed_out`.

use std::io::Write;

use serde::{Deserialize, Serialize};

/// Where a request ended. Exactly one per arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    ProxyReject,
    PartitionReject,
    QueueFull,
    ProxyCache,
    NodeCache,
    Disk,
}

impl Terminal {
    pub const ALL: [Terminal; 6] = [
        Terminal::ProxyReject,
        Terminal::PartitionReject,
        Terminal::QueueFull,
        Terminal::ProxyCache,
        Terminal::NodeCache,
        Terminal::Disk,
    ];

    pub fn is_served(self) -> bool {
        matches!(self, Terminal::ProxyCache | Terminal::NodeCache | Terminal::Disk)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub offered: u64,
    pub success: u64,
    pub rejected_proxy_quota: u64,
    pub rejected_partition_quota: u64,
    pub rejected_queue_full: u64,
    /// Served, but after the client deadline.
    pub timed_out: u64,
    pub proxy_cache_hits: u64,
    pub node_cache_hits: u64,
    pub disk_served: u64,
    pub charged_ru: u64,
}

impl Counters {
    pub fn terminal(&self, t: Terminal) -> u64 {
        match t {
            Terminal::ProxyReject => self.rejected_proxy_quota,
            Terminal::PartitionReject => self.rejected_partition_quota,
            Terminal::QueueFull => self.rejected_queue_full,
            Terminal::ProxyCache => self.proxy_cache_hits,
            Terminal::NodeCache => self.node_cache_hits,
            Terminal::Disk => self.disk_served,
        }
    }

    pub fn terminated(&self) -> u64 {
        Terminal::ALL.iter().map(|t| self.terminal(*t)).sum()
    }

    pub fn errors(&self) -> u64 {
        self.rejected_proxy_quota + self.rejected_partition_quota + self.rejected_queue_full + self.timed_out
    }

    pub fn add(&mut self, o: &Counters) {
        self.offered += o.offered;
        self.success += o.success;
        self.rejected_proxy_quota += o.rejected_proxy_quota;
        self.rejected_partition_quota += o.rejected_partition_quota;
        self.rejected_queue_full += o.rejected_queue_full;
        self.timed_out += o.timed_out;
        self.proxy_cache_hits += o.proxy_cache_hits;
        self.node_cache_hits += o.node_cache_hits;
        self.disk_served += o.disk_served;
        self.charged_ru += o.charged_ru;
    }
}

/// Nearest-rank percentile of sorted samples.
pub fn percentile(sorted: &[u32], p: f64) -> Option<u32> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Some(sorted[rank - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub second: u64,
    pub tenant: String,
    #[serde(flatten)]
    pub counters: Counters,
    pub p50_us: Option<u32>,
    pub p99_us: Option<u32>,
    pub max_us: Option<u32>,
}

#[derive(Debug, Clone, Default)]
pub struct MetricsSink {
    tenants: Vec<String>,
    counters: Vec<Vec<Counters>>,
    latencies: Vec<Vec<Vec<u32>>>,
}

impl MetricsSink {
    pub fn new(tenants: Vec<String>) -> Self {
        MetricsSink { tenants, counters: Vec::new(), latencies: Vec::new() }
    }

    pub fn tenants(&self) -> &[String] {
        &self.tenants
    }

    pub fn seconds(&self) -> u64 {
        self.counters.len() as u64
    }

    fn slot(&mut self, second: u64, tenant: usize) -> &mut Counters {
        let s = second as usize;
        while self.counters.len() <= s {
            self.counters.push(vec![Counters::default(); self.tenants.len()]);
            self.latencies.push(vec![Vec::new(); self.tenants.len()]);
        }
        &mut self.counters[s][tenant]
    }

    pub fn update(&mut self, second: u64, tenant: usize, f: impl FnOnce(&mut Counters)) {
        f(self.slot(second, tenant));
    }

    pub fn latency(&mut self, second: u64, tenant: usize, us: u64) {
        self.slot(second, tenant);
        self.latencies[second as usize][tenant].push(us.min(u64::from(u32::MAX)) as u32);
    }

    pub fn counters(&self, second: u64, tenant: usize) -> Counters {
        self.counters.get(second as usize).map_or_else(Counters::default, |r| r[tenant])
    }

    /// Sum over `[from, to)` seconds.
    pub fn window(&self, tenant: usize, from: u64, to: u64) -> Counters {
        let mut c = Counters::default();
        for s in from..to.min(self.seconds()) {
            c.add(&self.counters[s as usize][tenant]);
        }
        c
    }

    pub fn totals(&self, tenant: usize) -> Counters {
        self.window(tenant, 0, self.seconds())
    }

    /// Sorted latency samples of requests arriving in `[from, to)`.
    pub fn latencies(&self, tenant: usize, from: u64, to: u64) -> Vec<u32> {
        let mut v: Vec<u32> =
            (from..to.min(self.seconds())).flat_map(|s| self.latencies[s as usize][tenant].iter().copied()).collect();
        v.sort_unstable();
        v
    }

    pub fn rows(&self) -> impl Iterator<Item = MetricRow> + '_ {
        self.counters.iter().enumerate().flat_map(move |(s, row)| {
            row.iter().enumerate().map(move |(t, c)| {
                let mut lat = self.latencies[s][t].clone();
                lat.sort_unstable();
                MetricRow {
                    second: s as u64,
                    tenant: self.tenants[t].clone(),
                    counters: *c,
                    p50_us: percentile(&lat, 0.5),
                    p99_us: percentile(&lat, 0.99),
                    max_us: lat.last().copied(),
                }
            })
        })
    }

    /// One row per tenant-second, header first.
    pub fn write_csv(&self, w: impl Write) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "second",
            "tenant",
            "offered",
            "success",
            "rejected_proxy_quota",
            "rejected_partition_quota",
            "rejected_queue_full",
            "timed_out",
            "proxy_cache_hits",
            "node_cache_hits",
            "disk_served",
            "charged_ru",
            "p50_us",
            "p99_us",
            "max_us",
        ])?;
        let opt = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in self.rows() {
            let c = r.counters;
            wtr.write_record([
                r.second.to_string(),
                r.tenant,
                c.offered.to_string(),
                c.success.to_string(),
                c.rejected_proxy_quota.to_string(),
                c.rejected_partition_quota.to_string(),
                c.rejected_queue_full.to_string(),
                c.timed_out.to_string(),
                c.proxy_cache_hits.to_string(),
                c.node_cache_hits.to_string(),
                c.disk_served.to_string(),
                c.charged_ru.to_string(),
                opt(r.p50_us),
                opt(r.p99_us),
                opt(r.max_us),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
