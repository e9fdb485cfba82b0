//! Limited fan-out routing: keys hash to one of `n` proxy groups and each
//! request picks a random proxy inside its group.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lru::PlainLru;
use crate::hash::hash_u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FanoutError {
    #[error("proxy and group counts must be positive (proxies {proxies}, groups {groups})")]
    Empty { proxies: u32, groups: u32 },
    #[error("{groups} groups do not divide {proxies} proxies")]
    Uneven { proxies: u32, groups: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FanoutRouter {
    proxies: u32,
    groups: u32,
    seed: u64,
}

impl FanoutRouter {
    pub fn new(proxies: u32, groups: u32, seed: u64) -> Result<Self, FanoutError> {
        if proxies == 0 || groups == 0 {
            return Err(FanoutError::Empty { proxies, groups });
        }
        if !proxies.is_multiple_of(groups) {
            return Err(FanoutError::Uneven { proxies, groups });
        }
        Ok(FanoutRouter { proxies, groups, seed })
    }

    pub fn proxies(&self) -> u32 {
        self.proxies
    }

    pub fn groups(&self) -> u32 {
        self.groups
    }

    pub fn group_size(&self) -> u32 {
        self.proxies / self.groups
    }

    pub fn group_of(&self, key: u64) -> u32 {
        (hash_u64(self.seed, key) % u64::from(self.groups)) as u32
    }

    /// Proxy index serving this request for `key`.
    pub fn route<R: Rng + ?Sized>(&self, key: u64, rng: &mut R) -> u32 {
        let size = self.group_size();
        let base = self.group_of(key) * size;
        if size == 1 {
            base
        } else {
            base + rng.random_range(0..size)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanoutExperiment {
    pub requests: u64,
    pub keys: u64,
    pub zipf_exponent: f64,
    pub proxies: u32,
    pub groups: u32,
    /// Objects each proxy cache holds.
    pub cache_objects: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanoutReport {
    pub groups: u32,
    pub hit_ratio: f64,
    /// Requests for the most popular key.
    pub hot_key_requests: u64,
    /// Most hot-key requests landing on a single proxy.
    pub hot_key_peak_per_proxy: u64,
    /// Distinct proxies that served the hot key.
    pub hot_key_proxies: usize,
}

impl FanoutExperiment {
    /// Replays a Zipf request stream through the router into per-proxy object
    /// caches. Key rank 1 is the hot key.
    pub fn run(&self) -> Result<FanoutReport, FanoutError> {
        let router = FanoutRouter::new(self.proxies, self.groups, self.seed ^ 0x5eed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let zipf = Zipf::new(self.keys as f64, self.zipf_exponent).expect("valid zipf");
        let mut caches: Vec<PlainLru> = (0..self.proxies).map(|_| PlainLru::new(self.cache_objects)).collect();
        let mut hot_per_proxy = vec![0u64; self.proxies as usize];
        let mut hits = 0u64;
        for _ in 0..self.requests {
            let key = zipf.sample(&mut rng) as u64;
            let p = router.route(key, &mut rng) as usize;
            if key == 1 {
                hot_per_proxy[p] += 1;
            }
            if caches[p].get(key).is_some() {
                hits += 1;
            } else {
                caches[p].put(key, 1);
            }
        }
        Ok(FanoutReport {
            groups: self.groups,
            hit_ratio: hits as f64 / self.requests as f64,
            hot_key_requests: hot_per_proxy.iter().sum(),
            hot_key_peak_per_proxy: hot_per_proxy.iter().copied().max().unwrap_or(0),
            hot_key_proxies: hot_per_proxy.iter().filter(|c| **c > 0).count(),
        })
    }
}
