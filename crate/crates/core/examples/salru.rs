//! Size-aware LRU against plain LRU when a stream of large cold items passes
//! through a cache holding a hot set of small ones.
//!
//! `cargo run --example salru`

use abase_lite::cache::{PlainLru, SaLruCache};

fn main() {
    let capacity = 1 << 20;
    let mut sa = SaLruCache::new(capacity);
    let mut plain = PlainLru::new(capacity);
    let (mut sa_hits, mut plain_hits, mut reads) = (0u64, 0u64, 0u64);
    let mut now = 0u64;
    let mut cold = 1_000_000u64;
    for round in 0..10 {
        for key in 0..2000u64 {
            now += 1000;
            if round > 0 {
                reads += 1;
                sa_hits += u64::from(sa.get(key, now).is_some());
                plain_hits += u64::from(plain.get(key).is_some());
            }
            if !sa.contains(key) {
                sa.put(key, 256, now).expect("fits");
            }
            if plain.get(key).is_none() {
                plain.put(key, 256);
            }
            if key % 40 == 0 {
                cold += 1;
                sa.put(cold, 65_536, now).expect("fits");
                plain.put(cold, 65_536);
            }
        }
    }
    println!(
        "hot-set hit ratio: SA-LRU {:.3}, plain LRU {:.3}",
        sa_hits as f64 / reads as f64,
        plain_hits as f64 / reads as f64
    );
    println!("SA-LRU holds {} items in {} of {capacity} bytes", sa.len(), sa.used());
}
