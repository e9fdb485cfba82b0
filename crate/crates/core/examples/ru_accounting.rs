//! Request-unit billing: writes, read estimates, settled charges and hash scans.
//!
//! `cargo run --example ru_accounting`

use abase_lite::domain::RequestKind;
use abase_lite::ru::{
    estimate_read_ru, ru_complex, ru_write, settle_complex, settle_read, ReadStats, RuConfig, ServedFrom,
};

fn main() {
    let cfg = RuConfig::with_replicas(3);
    for bytes in [0, 100, 2048, 2049, 10_000] {
        println!("write of {bytes:>6} B across 3 replicas costs {} RU", ru_write(bytes, &cfg));
    }

    let one = RuConfig::with_replicas(1);
    let mut stats = ReadStats::new(one.window_k);
    println!("cold-start read estimate: {} RU", estimate_read_ru(&stats, &one));
    for (size, hit) in [(4096, false), (4096, true), (8192, false), (1024, true)] {
        stats.update(size, hit);
        println!(
            "after a {size} B {}: E[size] {:.0} B, hit ratio {:.2}, next read estimate {:.3} RU",
            if hit { "cache hit" } else { "miss" },
            stats.expected_size(),
            stats.hit_ratio(),
            estimate_read_ru(&stats, &one)
        );
    }

    for from in [ServedFrom::Disk, ServedFrom::NodeCache, ServedFrom::ProxyCache] {
        println!("5000 B read served from {from:?} settles at {} RU", settle_read(5000, from, &one));
    }

    let mut hashes = ReadStats::new(one.window_k);
    hashes.record_scan(16, 16 * 300);
    println!(
        "HLen {} RU, HGetAll estimate {:.3} RU, HGetAll of 4800 B settles at {} RU",
        ru_complex(RequestKind::HLen, &hashes, &one),
        ru_complex(RequestKind::HGetAll, &hashes, &one),
        settle_complex(RequestKind::HGetAll, 4800, &one)
    );
}
