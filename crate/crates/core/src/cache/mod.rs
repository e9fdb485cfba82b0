//! Caches at both ends of the request path and client-side routing.
//!
//! The data node keeps a size-aware LRU ([`SaLruCache`]) segmented by item
//! size. Proxies keep a TTL-bound LRU ([`AuLruCache`]) that refreshes hot
//! keys ahead of expiry. [`FanoutRouter`] confines each key to one proxy
//! group so its cached copy lives on a few proxies only.

mod aulru;
mod fanout;
mod lru;
mod salru;

use serde::{Deserialize, Serialize};

pub use aulru::{AuLookup, AuLruCache, AuLruConfig};
pub use fanout::{FanoutError, FanoutExperiment, FanoutReport, FanoutRouter};
pub use lru::{LruList, PlainLru};
pub use salru::{size_class, SaLruCache, TooLarge, CLASSES, CLASS_BOUNDS, DEFAULT_HALF_LIFE_US};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub inserts: u64,
    pub evictions: u64,
    pub expired: u64,
    pub refreshes: u64,
}

impl CacheStats {
    pub fn add(&mut self, o: &CacheStats) {
        self.hits += o.hits;
        self.misses += o.misses;
        self.inserts += o.inserts;
        self.evictions += o.evictions;
        self.expired += o.expired;
        self.refreshes += o.refreshes;
    }

    pub fn hit_ratio(&self) -> f64 {
        let total = self.hits + self.misses;
        if total == 0 {
            0.0
        } else {
            self.hits as f64 / total as f64
        }
    }
}
