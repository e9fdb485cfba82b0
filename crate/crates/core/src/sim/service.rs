//! Service-time model for simulated data nodes and proxies.

use serde::{Deserialize, Serialize};

use crate::wfq::default_extra_threads;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceModel {
    /// CPU time per estimated RU.
    pub cpu_us_per_ru: f64,
    /// Disk time per I/O operation.
    pub io_us_per_iops: f64,
    /// Bytes covered by one I/O operation.
    pub io_block_bytes: u64,
    /// CPU workers per node.
    pub cpu_threads: usize,
    /// Basic I/O threads per node.
    pub io_threads: usize,
    /// Extra I/O threads; defaults to a quarter of the basic ones, at least one.
    pub extra_io_threads: Option<usize>,
    /// One-way proxy to node latency.
    pub network_us: u64,
    /// Latency of a request answered by the proxy cache.
    pub proxy_hit_us: u64,
}

impl Default for ServiceModel {
    fn default() -> Self {
        ServiceModel {
            cpu_us_per_ru: 20.0,
            io_us_per_iops: 200.0,
            io_block_bytes: 4096,
            cpu_threads: 4,
            io_threads: 4,
            extra_io_threads: None,
            network_us: 0,
            proxy_hit_us: 50,
        }
    }
}

impl ServiceModel {
    /// CPU stage time for a request estimated at `ru`.
    pub fn cpu_us(&self, ru: f64) -> u64 {
        ((self.cpu_us_per_ru * ru).round() as u64).max(1)
    }

    /// I/O operations needed to move `bytes`.
    pub fn iops(&self, bytes: u64) -> u64 {
        bytes.div_ceil(self.io_block_bytes).max(1)
    }

    pub fn io_us(&self, iops: u64) -> u64 {
        ((self.io_us_per_iops * iops as f64).round() as u64).max(1)
    }

    pub fn extra_threads(&self) -> usize {
        self.extra_io_threads.unwrap_or_else(|| default_extra_threads(self.io_threads))
    }

    pub fn validate(&self, path: &str, errs: &mut Vec<String>) {
        if !(self.cpu_us_per_ru > 0.0) {
            errs.push(format!("{path}.cpu_us_per_ru: must be > 0"));
        }
        if !(self.io_us_per_iops > 0.0) {
            errs.push(format!("{path}.io_us_per_iops: must be > 0"));
        }
        if self.io_block_bytes == 0 {
            errs.push(format!("{path}.io_block_bytes: must be > 0"));
        }
        if self.cpu_threads == 0 {
            errs.push(format!("{path}.cpu_threads: must be > 0"));
        }
        if self.io_threads == 0 {
            errs.push(format!("{path}.io_threads: must be > 0"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_arithmetic() {
        let m = ServiceModel::default();
        // A 1-RU read answered by the node cache has no I/O stage.
        assert_eq!(m.cpu_us(1.0), 20);
        // A miss of one block adds one I/O operation.
        assert_eq!(m.cpu_us(1.0) + m.io_us(m.iops(1024)), 220);
        // A 3-RU write.
        assert_eq!(m.cpu_us(3.0), 60);
        assert_eq!(m.io_us(m.iops(2048)), 200);
        assert_eq!(m.iops(4097), 2);
        assert_eq!(m.extra_threads(), 1);
    }
}
