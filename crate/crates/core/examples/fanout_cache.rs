//! Limited fan-out routing: fewer proxies per key means more proxy-cache hits
//! and a hot key spread over a bounded set of proxies.
//!
//! `cargo run --release --example fanout_cache`

use abase_lite::cache::FanoutExperiment;

fn main() {
    println!("groups  proxies/key  hit ratio  hot-key proxies  hot-key peak/proxy");
    for groups in [1, 3, 5, 15, 25, 75] {
        let r = FanoutExperiment {
            requests: 500_000,
            keys: 100_000,
            zipf_exponent: 1.0,
            proxies: 75,
            groups,
            cache_objects: 100,
            seed: 1,
        }
        .run()
        .expect("groups divide 75");
        println!(
            "{groups:>6}  {:>11}  {:>9.4}  {:>15}  {:>18}",
            75 / groups,
            r.hit_ratio,
            r.hot_key_proxies,
            r.hot_key_peak_per_proxy
        );
    }
}
