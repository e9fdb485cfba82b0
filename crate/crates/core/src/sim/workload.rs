//! Synthetic tenant workloads: arrival processes, key popularity, value
//! sizes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Zipf};
use serde::{Deserialize, Serialize};

use crate::admission::US_PER_SEC;
use crate::hash::{hash_u64, mix64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalProcess {
    /// Evenly spaced arrivals.
    Constant { rate: f64 },
    /// Evenly spaced at `base`, switching to `burst` inside `[start_s, end_s)`.
    Step {
        base: f64,
        burst: f64,
        start_s: f64,
        #[serde(default)]
        end_s: Option<f64>,
    },
    /// Poisson arrivals thinned against
    /// `base + growth_per_s * t + amplitude * sin(2 pi t / period_s)`.
    Diurnal {
        base: f64,
        amplitude: f64,
        period_s: f64,
        #[serde(default)]
        growth_per_s: f64,
    },
}

impl ArrivalProcess {
    /// Instantaneous rate at `t_s` seconds.
    pub fn rate_at(&self, t_s: f64) -> f64 {
        match *self {
            ArrivalProcess::Constant { rate } => rate,
            ArrivalProcess::Step { base, burst, start_s, end_s } => {
                if t_s >= start_s && end_s.is_none_or(|e| t_s < e) {
                    burst
                } else {
                    base
                }
            }
            ArrivalProcess::Diurnal { base, amplitude, period_s, growth_per_s } => {
                let phase = 2.0 * std::f64::consts::PI * t_s / period_s;
                (base + growth_per_s * t_s + amplitude * phase.sin()).max(0.0)
            }
        }
    }

    pub fn validate(&self, path: &str, errs: &mut Vec<String>) {
        let mut nonneg = |name: &str, v: f64| {
            if !(v >= 0.0) || !v.is_finite() {
                errs.push(format!("{path}.{name}: must be finite and >= 0, got {v}"));
            }
        };
        match *self {
            ArrivalProcess::Constant { rate } => nonneg("rate", rate),
            ArrivalProcess::Step { base, burst, start_s, end_s } => {
                nonneg("base", base);
                nonneg("burst", burst);
                nonneg("start_s", start_s);
                if let Some(e) = end_s {
                    nonneg("end_s", e);
                    if e < start_s {
                        errs.push(format!("{path}.end_s: {e} is before start_s {start_s}"));
                    }
                }
            }
            ArrivalProcess::Diurnal { base, amplitude, period_s, growth_per_s } => {
                nonneg("base", base);
                nonneg("amplitude", amplitude);
                if !(period_s > 0.0) {
                    errs.push(format!("{path}.period_s: must be > 0, got {period_s}"));
                }
                if !growth_per_s.is_finite() {
                    errs.push(format!("{path}.growth_per_s: must be finite"));
                }
            }
        }
    }
}

/// Lazily yields arrival times (µs) below a horizon.
#[derive(Debug, Clone)]
pub struct ArrivalGen {
    process: ArrivalProcess,
    horizon_us: u64,
    index: u64,
    last_us: u64,
    rng: ChaCha8Rng,
    rate_max: f64,
}

impl ArrivalGen {
    pub fn new(process: ArrivalProcess, horizon_us: u64, seed: u64) -> Self {
        let horizon_s = horizon_us as f64 / US_PER_SEC as f64;
        let rate_max = match process {
            ArrivalProcess::Diurnal { base, amplitude, growth_per_s, .. } => {
                base + amplitude + (growth_per_s * horizon_s).max(0.0)
            }
            _ => 0.0,
        };
        ArrivalGen { process, horizon_us, index: 0, last_us: 0, rng: ChaCha8Rng::seed_from_u64(seed), rate_max }
    }

    /// Time at which the cumulative count of a piecewise-constant process
    /// reaches `n`.
    fn grid_time(&self, n: f64) -> Option<f64> {
        match self.process {
            ArrivalProcess::Constant { rate } => (rate > 0.0).then(|| n / rate),
            ArrivalProcess::Step { base, burst, start_s, end_s } => {
                let before = base * start_s;
                if n < before {
                    return Some(n / base);
                }
                let after_start = n - before;
                match end_s {
                    Some(e) => {
                        let during = burst * (e - start_s);
                        if after_start < during {
                            Some(start_s + after_start / burst)
                        } else if base > 0.0 {
                            Some(e + (after_start - during) / base)
                        } else {
                            None
                        }
                    }
                    None => (burst > 0.0).then(|| start_s + after_start / burst),
                }
            }
            ArrivalProcess::Diurnal { .. } => unreachable!("diurnal arrivals are sampled"),
        }
    }

    pub fn next_arrival(&mut self) -> Option<u64> {
        let t = match self.process {
            ArrivalProcess::Diurnal { .. } => {
                if self.rate_max <= 0.0 {
                    return None;
                }
                let exp = Exp::new(self.rate_max).expect("positive rate");
                let mut t_s = self.last_us as f64 / US_PER_SEC as f64;
                loop {
                    t_s += exp.sample(&mut self.rng);
                    if t_s * US_PER_SEC as f64 >= self.horizon_us as f64 {
                        return None;
                    }
                    if self.rng.random::<f64>() * self.rate_max < self.process.rate_at(t_s) {
                        break;
                    }
                }
                (t_s * US_PER_SEC as f64) as u64
            }
            _ => {
                let t_s = self.grid_time(self.index as f64)?;
                (t_s * US_PER_SEC as f64).floor() as u64
            }
        };
        if t >= self.horizon_us {
            return None;
        }
        self.index += 1;
        self.last_us = t;
        Some(t)
    }
}

/// Which keys requests touch. Keys are `0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KeyPopularity {
    Uniform {
        count: u64,
    },
    /// Rank `r` (1-based) maps to key `r - 1`.
    Zipf {
        count: u64,
        exponent: f64,
    },
    /// `fraction` of requests go to the first `hot_keys` keys, the rest are
    /// uniform over all keys.
    HotKey {
        count: u64,
        hot_keys: u64,
        fraction: f64,
    },
}

impl Default for KeyPopularity {
    fn default() -> Self {
        KeyPopularity::Uniform { count: 1000 }
    }
}

impl KeyPopularity {
    pub fn validate(&self, path: &str, errs: &mut Vec<String>) {
        match *self {
            KeyPopularity::Uniform { count } | KeyPopularity::Zipf { count, .. } if count == 0 => {
                errs.push(format!("{path}.count: must be > 0"))
            }
            KeyPopularity::Zipf { exponent, .. } if !(exponent >= 0.0) => {
                errs.push(format!("{path}.exponent: must be >= 0, got {exponent}"))
            }
            KeyPopularity::HotKey { count, hot_keys, fraction } => {
                if count == 0 || hot_keys == 0 || hot_keys > count {
                    errs.push(format!("{path}: need 0 < hot_keys <= count, got {hot_keys} of {count}"));
                }
                if !(0.0..=1.0).contains(&fraction) {
                    errs.push(format!("{path}.fraction: must be in [0, 1], got {fraction}"));
                }
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone)]
pub enum KeySampler {
    Uniform(u64),
    Zipf(Zipf<f64>),
    Hot { count: u64, hot: u64, fraction: f64 },
}

impl KeySampler {
    pub fn new(p: KeyPopularity) -> Self {
        match p {
            KeyPopularity::Uniform { count } => KeySampler::Uniform(count),
            KeyPopularity::Zipf { count, exponent } => {
                KeySampler::Zipf(Zipf::new(count as f64, exponent).expect("validated zipf"))
            }
            KeyPopularity::HotKey { count, hot_keys, fraction } => KeySampler::Hot { count, hot: hot_keys, fraction },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            KeySampler::Uniform(n) => rng.random_range(0..*n),
            KeySampler::Zipf(z) => z.sample(rng) as u64 - 1,
            KeySampler::Hot { count, hot, fraction } => {
                if rng.random::<f64>() < *fraction {
                    rng.random_range(0..*hot)
                } else {
                    rng.random_range(0..*count)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValueSize {
    Fixed {
        bytes: u64,
    },
    /// Natural-log parameters; each key draws its size once.
    LogNormal {
        mu: f64,
        sigma: f64,
    },
}

impl Default for ValueSize {
    fn default() -> Self {
        ValueSize::Fixed { bytes: 2048 }
    }
}

impl ValueSize {
    /// Stable size of `key`: the same key always has the same size.
    pub fn size_of(&self, seed: u64, key: u64) -> u64 {
        match *self {
            ValueSize::Fixed { bytes } => bytes,
            ValueSize::LogNormal { mu, sigma } => {
                let mut rng = ChaCha8Rng::seed_from_u64(hash_u64(seed, key));
                let d = LogNormal::new(mu, sigma).expect("validated lognormal");
                (d.sample(&mut rng).round() as u64).max(1)
            }
        }
    }

    pub fn validate(&self, path: &str, errs: &mut Vec<String>) {
        if let ValueSize::LogNormal { mu, sigma } = *self {
            if !mu.is_finite() || !(sigma >= 0.0) {
                errs.push(format!("{path}: lognormal needs finite mu and sigma >= 0"));
            }
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadProfile {
    pub tenant: String,
    pub arrival: ArrivalProcess,
    #[serde(default)]
    pub keys: KeyPopularity,
    /// Probability that a request is a read.
    #[serde(default = "one")]
    pub read_ratio: f64,
    #[serde(default)]
    pub value_size: ValueSize,
    /// Proxy cache TTL; `None` keeps entries until evicted.
    #[serde(default)]
    pub ttl_s: Option<f64>,
}

impl WorkloadProfile {
    pub fn validate(&self, path: &str, errs: &mut Vec<String>) {
        self.arrival.validate(&format!("{path}.arrival"), errs);
        self.keys.validate(&format!("{path}.keys"), errs);
        self.value_size.validate(&format!("{path}.value_size"), errs);
        if !(0.0..=1.0).contains(&self.read_ratio) {
            errs.push(format!("{path}.read_ratio: must be in [0, 1], got {}", self.read_ratio));
        }
        if let Some(t) = self.ttl_s {
            if !(t > 0.0) {
                errs.push(format!("{path}.ttl_s: must be > 0, got {t}"));
            }
        }
    }
}

/// Arrival times of `profile` over `duration_us`, as generated in a run.
pub fn gen_arrivals(profile: &ArrivalProcess, duration_us: u64, seed: u64) -> Vec<u64> {
    let mut g = ArrivalGen::new(*profile, duration_us, seed);
    std::iter::from_fn(|| g.next_arrival()).collect()
}

/// Derives an independent stream seed.
pub fn stream_seed(seed: u64, stream: u64, purpose: u64) -> u64 {
    mix64(hash_u64(seed, stream) ^ mix64(purpose.wrapping_add(0x51)))
}
