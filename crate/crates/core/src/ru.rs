//! Request Unit accounting: write charges, read estimates and settlement,
//! and the decomposition used for hash scans.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::domain::RequestKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuConfig {
    /// Bytes per RU.
    pub unit_size: u64,
    pub replica_count: u32,
    /// Number of recent reads averaged by [`ReadStats`].
    pub window_k: usize,
    /// Estimate used before any read has been observed.
    pub cold_start_ru: f64,
}

impl Default for RuConfig {
    fn default() -> Self {
        RuConfig { unit_size: 2048, replica_count: 3, window_k: 100, cold_start_ru: 1.0 }
    }
}

impl RuConfig {
    pub fn with_replicas(replica_count: u32) -> Self {
        RuConfig { replica_count, ..RuConfig::default() }
    }

    /// `max(1, ceil(bytes / U))`.
    pub fn units(&self, bytes: u64) -> u64 {
        bytes.div_ceil(self.unit_size).max(1)
    }
}

/// Where a read was answered from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServedFrom {
    ProxyCache,
    NodeCache,
    Disk,
}

/// RU billed for a write of `value_size` bytes, across all replicas.
pub fn ru_write(value_size: u64, cfg: &RuConfig) -> u64 {
    u64::from(cfg.replica_count) * cfg.units(value_size)
}

/// RU billed for a completed read. Proxy-cache hits are free.
pub fn settle_read(actual_size: u64, served_from: ServedFrom, cfg: &RuConfig) -> u64 {
    match served_from {
        ServedFrom::ProxyCache => 0,
        ServedFrom::NodeCache | ServedFrom::Disk => cfg.units(actual_size),
    }
}

/// Sliding window of recent read observations for one tenant.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadStats {
    window_k: usize,
    samples: VecDeque<(u64, bool)>,
    size_sum: u128,
    hit_count: usize,
    scans: VecDeque<(u64, u64)>,
    scan_len_sum: u128,
    scan_bytes_sum: u128,
}

impl ReadStats {
    pub fn new(window_k: usize) -> Self {
        assert!(window_k >= 1, "window_k must be at least 1");
        ReadStats {
            window_k,
            samples: VecDeque::with_capacity(window_k),
            size_sum: 0,
            hit_count: 0,
            scans: VecDeque::with_capacity(window_k),
            scan_len_sum: 0,
            scan_bytes_sum: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Records one read. `hit` is whether it was served from a cache.
    pub fn update(&mut self, observed_size: u64, hit: bool) {
        if self.samples.len() == self.window_k {
            let (s, h) = self.samples.pop_front().expect("full window");
            self.size_sum -= u128::from(s);
            self.hit_count -= usize::from(h);
        }
        self.samples.push_back((observed_size, hit));
        self.size_sum += u128::from(observed_size);
        self.hit_count += usize::from(hit);
    }

    /// Mean observed read size; 0 when empty.
    pub fn expected_size(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.size_sum as f64 / self.samples.len() as f64
        }
    }

    /// Fraction of recent reads served from a cache; 0 when empty.
    pub fn hit_ratio(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.hit_count as f64 / self.samples.len() as f64
        }
    }

    /// Records a completed hash scan of `len` fields totalling `bytes`.
    pub fn record_scan(&mut self, len: u64, bytes: u64) {
        if self.scans.len() == self.window_k {
            let (l, b) = self.scans.pop_front().expect("full window");
            self.scan_len_sum -= u128::from(l);
            self.scan_bytes_sum -= u128::from(b);
        }
        self.scans.push_back((len, bytes));
        self.scan_len_sum += u128::from(len);
        self.scan_bytes_sum += u128::from(bytes);
    }

    /// Mean hash length over recorded scans, if any.
    pub fn expected_hash_len(&self) -> Option<f64> {
        (!self.scans.is_empty()).then(|| self.scan_len_sum as f64 / self.scans.len() as f64)
    }

    /// Mean bytes per hash field; 0 when no field has been seen.
    pub fn expected_field_size(&self) -> f64 {
        if self.scan_len_sum == 0 {
            0.0
        } else {
            self.scan_bytes_sum as f64 / self.scan_len_sum as f64
        }
    }
}

/// Fractional RU estimate for an upcoming read.
pub fn estimate_read_ru(stats: &ReadStats, cfg: &RuConfig) -> f64 {
    if stats.is_empty() {
        return cfg.cold_start_ru;
    }
    stats.expected_size() * (1.0 - stats.hit_ratio()) / cfg.unit_size as f64
}

/// RU for a metadata lookup.
pub const HLEN_RU: f64 = 1.0;

/// Estimate for a compound hash read: a length lookup plus the scan it implies.
pub fn ru_complex(kind: RequestKind, stats: &ReadStats, cfg: &RuConfig) -> f64 {
    match kind {
        RequestKind::HLen => HLEN_RU,
        RequestKind::HGetAll => match stats.expected_hash_len() {
            None => cfg.cold_start_ru,
            Some(len) => HLEN_RU + len * stats.expected_field_size() / cfg.unit_size as f64,
        },
        RequestKind::Get | RequestKind::Put => {
            panic!("ru_complex called with simple request kind {kind:?}")
        }
    }
}

/// RU billed for a completed compound read that scanned `scan_bytes`.
pub fn settle_complex(kind: RequestKind, scan_bytes: u64, cfg: &RuConfig) -> u64 {
    match kind {
        RequestKind::HLen => 1,
        RequestKind::HGetAll => 1 + scan_bytes.div_ceil(cfg.unit_size),
        RequestKind::Get | RequestKind::Put => {
            panic!("settle_complex called with simple request kind {kind:?}")
        }
    }
}
