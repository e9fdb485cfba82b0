//! Proxy-side LRU with TTL expiry that refreshes hot entries before they
//! expire.

use serde::{Deserialize, Serialize};

use super::lru::LruList;
use super::CacheStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuLruConfig {
    pub capacity_bytes: u64,
    pub refresh_window_us: u64,
    /// Hits since the last fill that make an entry hot.
    pub hot_threshold: u32,
    pub active_refresh: bool,
}

impl Default for AuLruConfig {
    fn default() -> Self {
        AuLruConfig { capacity_bytes: 1 << 30, refresh_window_us: 5_000_000, hot_threshold: 3, active_refresh: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    size: u64,
    expire_at_us: u64,
    hit_count: u32,
    refreshing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuLookup {
    Hit { size: u64, schedule_refresh: bool },
    Miss,
}

#[derive(Debug, Clone)]
pub struct AuLruCache {
    cfg: AuLruConfig,
    used: u64,
    list: LruList<Entry>,
    pub stats: CacheStats,
}

impl AuLruCache {
    pub fn new(cfg: AuLruConfig) -> Self {
        AuLruCache { cfg, used: 0, list: LruList::new(), stats: CacheStats::default() }
    }

    pub fn config(&self) -> &AuLruConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn is_refreshing(&self, key: u64) -> bool {
        self.list.peek(key).is_some_and(|e| e.refreshing)
    }

    /// Looks up `key` at `now_us`. Expired entries are misses. A hit on a hot
    /// entry inside the refresh window asks the caller to schedule a refresh.
    pub fn get(&mut self, key: u64, now_us: u64) -> AuLookup {
        let Some(e) = self.list.peek(key).copied() else {
            self.stats.misses += 1;
            return AuLookup::Miss;
        };
        if now_us >= e.expire_at_us {
            if !e.refreshing {
                self.list.remove(key);
                self.used -= e.size;
            }
            self.stats.misses += 1;
            self.stats.expired += 1;
            return AuLookup::Miss;
        }
        self.list.touch(key);
        let e = self.list.peek_mut(key).expect("present");
        e.hit_count += 1;
        let schedule = self.cfg.active_refresh
            && !e.refreshing
            && e.expire_at_us - now_us <= self.cfg.refresh_window_us
            && e.hit_count >= self.cfg.hot_threshold;
        if schedule {
            e.refreshing = true;
            self.stats.refreshes += 1;
        }
        self.stats.hits += 1;
        AuLookup::Hit { size: e.size, schedule_refresh: schedule }
    }

    /// Fills `key` with a fresh TTL. Returns evicted keys; items larger than
    /// the cache are not stored.
    pub fn put(&mut self, key: u64, size: u64, ttl_us: u64, now_us: u64) -> Vec<u64> {
        if size > self.cfg.capacity_bytes {
            return Vec::new();
        }
        self.invalidate(key);
        let mut evicted = Vec::new();
        while self.used + size > self.cfg.capacity_bytes {
            let (k, e) = self.list.pop_back().expect("non-empty while over capacity");
            self.used -= e.size;
            self.stats.evictions += 1;
            evicted.push(k);
        }
        let entry = Entry { size, expire_at_us: now_us.saturating_add(ttl_us), hit_count: 0, refreshing: false };
        self.list.push_front(key, entry);
        self.used += size;
        self.stats.inserts += 1;
        evicted
    }

    /// Installs the result of a refresh: new size, new expiry, hit count reset.
    pub fn complete_refresh(&mut self, key: u64, size: u64, ttl_us: u64, now_us: u64) -> Vec<u64> {
        match self.list.peek_mut(key) {
            Some(e) if size == e.size => {
                e.expire_at_us = now_us.saturating_add(ttl_us);
                e.hit_count = 0;
                e.refreshing = false;
                Vec::new()
            }
            Some(_) => self.put(key, size, ttl_us, now_us),
            // Evicted while the refresh was in flight.
            None => Vec::new(),
        }
    }

    pub fn invalidate(&mut self, key: u64) -> bool {
        match self.list.remove(key) {
            Some(e) => {
                self.used -= e.size;
                true
            }
            None => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const S: u64 = 1_000_000;

    fn cache() -> AuLruCache {
        AuLruCache::new(AuLruConfig { capacity_bytes: 1 << 20, ..AuLruConfig::default() })
    }

    #[test]
    fn expired_entry_is_a_miss() {
        let mut c = cache();
        c.put(1, 100, 10 * S, 0);
        assert_eq!(c.get(1, 10 * S), AuLookup::Miss);
        assert!(c.is_empty());
    }

    #[test]
    fn hot_entry_near_expiry_schedules_refresh() {
        let mut c = cache();
        c.put(1, 100, 10 * S, 0);
        for t in 1..=3 {
            assert_eq!(c.get(1, t * S), AuLookup::Hit { size: 100, schedule_refresh: false });
        }
        assert_eq!(c.get(1, 9 * S), AuLookup::Hit { size: 100, schedule_refresh: true });
        // At most one refresh in flight.
        assert_eq!(c.get(1, 9 * S + 1), AuLookup::Hit { size: 100, schedule_refresh: false });
        c.complete_refresh(1, 100, 10 * S, 9 * S + 1000);
        assert!(!c.is_refreshing(1));
        assert!(matches!(c.get(1, 15 * S), AuLookup::Hit { .. }));
    }

    #[test]
    fn cold_entry_near_expiry_is_not_refreshed() {
        let mut c = cache();
        c.put(1, 100, 10 * S, 0);
        assert_eq!(c.get(1, 9 * S), AuLookup::Hit { size: 100, schedule_refresh: false });
    }

    #[test]
    fn refresh_disabled() {
        let mut c = AuLruCache::new(AuLruConfig { active_refresh: false, ..AuLruConfig::default() });
        c.put(1, 100, 10 * S, 0);
        for t in 1..10 {
            assert_eq!(c.get(1, t * S), AuLookup::Hit { size: 100, schedule_refresh: false });
        }
    }

    #[test]
    fn evicts_lru_when_full() {
        let mut c = AuLruCache::new(AuLruConfig { capacity_bytes: 300, ..AuLruConfig::default() });
        for k in 0..3 {
            c.put(k, 100, 100 * S, 0);
        }
        c.get(0, 1);
        assert_eq!(c.put(9, 100, 100 * S, 2), vec![1]);
    }
}
