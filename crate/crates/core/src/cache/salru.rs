//! Size-aware LRU: one recency list per size class, with per-class byte
//! budgets proportional to each class's recent hits per resident byte.

use std::collections::HashMap;

use thiserror::Error;

use super::lru::LruList;
use super::CacheStats;

/// Upper bounds (inclusive) of the first three size classes.
pub const CLASS_BOUNDS: [u64; 3] = [256, 4096, 65536];
pub const CLASSES: usize = 4;

pub fn size_class(size: u64) -> usize {
    CLASS_BOUNDS.iter().position(|b| size <= *b).unwrap_or(CLASSES - 1)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("item of {size} bytes exceeds cache capacity {capacity}")]
pub struct TooLarge {
    pub size: u64,
    pub capacity: u64,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    size: u64,
    last_access_us: u64,
}

#[derive(Debug, Clone, Default)]
struct Class {
    list: LruList<Entry>,
    bytes: u64,
    hits: f64,
    hits_at_us: u64,
}

#[derive(Debug, Clone)]
pub struct SaLruCache {
    capacity: u64,
    used: u64,
    half_life_us: u64,
    classes: [Class; CLASSES],
    index: HashMap<u64, usize>,
    pub stats: CacheStats,
}

/// Half-life of the per-class hit counters.
pub const DEFAULT_HALF_LIFE_US: u64 = 60_000_000;

impl SaLruCache {
    pub fn new(capacity: u64) -> Self {
        Self::with_half_life(capacity, DEFAULT_HALF_LIFE_US)
    }

    pub fn with_half_life(capacity: u64, half_life_us: u64) -> Self {
        SaLruCache {
            capacity,
            used: 0,
            half_life_us,
            classes: Default::default(),
            index: HashMap::new(),
            stats: CacheStats::default(),
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn class_bytes(&self, class: usize) -> u64 {
        self.classes[class].bytes
    }

    pub fn class_len(&self, class: usize) -> usize {
        self.classes[class].list.len()
    }

    pub fn contains(&self, key: u64) -> bool {
        self.index.contains_key(&key)
    }

    fn decayed(&self, c: usize, now_us: u64) -> f64 {
        let cl = &self.classes[c];
        let dt = now_us.saturating_sub(cl.hits_at_us) as f64;
        cl.hits * (-dt / self.half_life_us as f64).exp2()
    }

    /// Looks `key` up; a hit refreshes its recency within its class.
    pub fn get(&mut self, key: u64, now_us: u64) -> Option<u64> {
        let Some(&c) = self.index.get(&key) else {
            self.stats.misses += 1;
            return None;
        };
        let h = self.decayed(c, now_us) + 1.0;
        let cl = &mut self.classes[c];
        cl.hits = h;
        cl.hits_at_us = now_us;
        cl.list.touch(key);
        let e = cl.list.peek_mut(key).expect("indexed");
        e.last_access_us = now_us;
        self.stats.hits += 1;
        Some(e.size)
    }

    /// Byte budget of each class at `now_us`, proportional to smoothed hits
    /// per resident byte. `None` for an empty cache.
    pub fn budgets(&self, now_us: u64) -> Option<[f64; CLASSES]> {
        let mut density = [0.0; CLASSES];
        for (c, d) in density.iter_mut().enumerate() {
            let b = self.classes[c].bytes;
            if b > 0 {
                // One pseudo-hit per class keeps a new class from being starved.
                *d = (self.decayed(c, now_us) + 1.0) / b as f64;
            }
        }
        let total: f64 = density.iter().sum();
        if total == 0.0 {
            return None;
        }
        Some(density.map(|d| self.capacity as f64 * d / total))
    }

    fn victim_class(&self, now_us: u64) -> usize {
        if let Some(budget) = self.budgets(now_us) {
            let mut best: Option<(f64, usize)> = None;
            for c in (0..CLASSES).rev() {
                let over = self.classes[c].bytes as f64 - budget[c];
                if self.classes[c].bytes > 0 && over > 0.0 && best.is_none_or(|(o, _)| over > o) {
                    best = Some((over, c));
                }
            }
            if let Some((_, c)) = best {
                return c;
            }
        }
        // No class is over budget: fall back to the globally oldest tail.
        (0..CLASSES)
            .filter_map(|c| self.classes[c].list.back().map(|(_, e)| (e.last_access_us, c)))
            .min()
            .map(|(_, c)| c)
            .expect("non-empty cache")
    }

    fn evict_one(&mut self, now_us: u64) -> u64 {
        let c = self.victim_class(now_us);
        let (key, e) = self.classes[c].list.pop_back().expect("victim class non-empty");
        self.classes[c].bytes -= e.size;
        self.used -= e.size;
        self.index.remove(&key);
        self.stats.evictions += 1;
        key
    }

    /// Inserts `key` and returns the evicted keys.
    pub fn put(&mut self, key: u64, size: u64, now_us: u64) -> Result<Vec<u64>, TooLarge> {
        if size > self.capacity {
            return Err(TooLarge { size, capacity: self.capacity });
        }
        self.remove(key);
        let mut evicted = Vec::new();
        while self.used + size > self.capacity {
            evicted.push(self.evict_one(now_us));
        }
        let c = size_class(size);
        self.classes[c].list.push_front(key, Entry { size, last_access_us: now_us });
        self.classes[c].bytes += size;
        self.used += size;
        self.index.insert(key, c);
        self.stats.inserts += 1;
        Ok(evicted)
    }

    pub fn remove(&mut self, key: u64) -> bool {
        let Some(c) = self.index.remove(&key) else { return false };
        let e = self.classes[c].list.remove(key).expect("indexed");
        self.classes[c].bytes -= e.size;
        self.used -= e.size;
        true
    }

    /// Keys of class `c` from most to least recently used.
    pub fn class_keys(&self, c: usize) -> Vec<u64> {
        self.classes[c].list.keys().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cache::lru::PlainLru;
    use proptest::prelude::*;

    #[test]
    fn class_boundaries() {
        assert_eq!(size_class(0), 0);
        assert_eq!(size_class(256), 0);
        assert_eq!(size_class(257), 1);
        assert_eq!(size_class(4096), 1);
        assert_eq!(size_class(65536), 2);
        assert_eq!(size_class(65537), 3);
    }

    #[test]
    fn hit_and_miss() {
        let mut c = SaLruCache::new(1 << 20);
        c.put(1, 100, 0).unwrap();
        assert_eq!(c.get(1, 1), Some(100));
        assert_eq!(c.get(2, 1), None);
    }

    #[test]
    fn first_put_evicts_nothing() {
        let mut c = SaLruCache::new(10 * 1024);
        assert!(c.put(1, 1024, 0).unwrap().is_empty());
    }

    #[test]
    fn oversized_put_is_rejected() {
        let mut c = SaLruCache::new(1000);
        c.put(1, 10, 0).unwrap();
        assert_eq!(c.put(2, 1001, 0), Err(TooLarge { size: 1001, capacity: 1000 }));
        assert_eq!((c.len(), c.used()), (1, 10));
    }

    #[test]
    fn single_class_matches_reference_lru() {
        let mut c = SaLruCache::new(10 * 1024);
        let mut oracle: Vec<u64> = Vec::new(); // front = MRU
        let access = |o: &mut Vec<u64>, k: u64| {
            o.retain(|x| *x != k);
            o.insert(0, k);
        };
        for k in 0..10 {
            c.put(k, 1024, k).unwrap();
            access(&mut oracle, k);
        }
        for (t, k) in [3u64, 7, 0, 3].iter().enumerate() {
            c.get(*k, 20 + t as u64);
            access(&mut oracle, *k);
        }
        let expected_victim = *oracle.last().unwrap();
        let evicted = c.put(100, 1024, 50).unwrap();
        assert_eq!(evicted, vec![expected_victim]);
        oracle.pop();
        access(&mut oracle, 100);
        assert_eq!(c.class_keys(1), oracle);
    }

    #[test]
    fn large_items_go_first_under_small_pressure() {
        let cap = 1 << 20;
        let mut sa = SaLruCache::new(cap);
        let mut plain = PlainLru::new(cap);
        let mut t = 0u64;
        for k in 0..16 {
            sa.put(1_000_000 + k, 65536, t).unwrap();
            plain.put(1_000_000 + k, 65536);
        }
        // 2000 small keys cycled with hits; the working set is half the cache.
        let (mut sa_hits, mut plain_hits, mut n) = (0, 0, 0);
        for round in 0..6 {
            for k in 0..2000u64 {
                t += 1000;
                if round > 0 {
                    n += 1;
                    sa_hits += usize::from(sa.get(k, t).is_some());
                    plain_hits += usize::from(plain.get(k).is_some());
                }
                if !sa.contains(k) {
                    sa.put(k, 256, t).unwrap();
                }
                if plain.get(k).is_none() {
                    plain.put(k, 256);
                }
                // A cold large item streams through every 50 requests.
                if k % 50 == 0 {
                    let big = 2_000_000 + round * 100 + k / 50;
                    sa.put(big, 65536, t).unwrap();
                    plain.put(big, 65536);
                }
            }
        }
        let sa_ratio = sa_hits as f64 / n as f64;
        let plain_ratio = plain_hits as f64 / n as f64;
        assert!(sa_ratio >= 0.95, "sa {sa_ratio}");
        assert!(sa_ratio > plain_ratio, "sa {sa_ratio} plain {plain_ratio}");
        assert_eq!(sa.class_len(0), 2000);
    }

    proptest! {
        #[test]
        fn bytes_bounded_and_index_consistent(
            ops in prop::collection::vec((0u64..200, 1u64..100_000, any::<bool>()), 1..400)
        ) {
            let mut c = SaLruCache::new(300_000);
            for (t, (k, size, get)) in ops.into_iter().enumerate() {
                let now = t as u64 * 10_000;
                if get {
                    c.get(k, now);
                } else {
                    c.put(k, size, now).unwrap();
                }
                prop_assert!(c.used() <= c.capacity());
                let listed: usize = (0..CLASSES).map(|cl| c.class_len(cl)).sum();
                prop_assert_eq!(listed, c.len());
                let bytes: u64 = (0..CLASSES).map(|cl| c.class_bytes(cl)).sum();
                prop_assert_eq!(bytes, c.used());
            }
        }
    }
}
