//! Two-level admission: proxy token buckets with a burst ceiling, the meta
//! monitor that reverts bursting, and the hard per-partition cap.
//!
//! `cargo run --example admission`

use abase_lite::admission::{AdmissionConfig, MetaMonitor, PartitionGate, ProxyState};
use abase_lite::domain::{PartitionId, TenantId};

const SEC: u64 = 1_000_000;

fn main() {
    let cfg = AdmissionConfig::default();
    let tenant = TenantId(0);
    let proxies = 2u32;
    let quota = 1000.0;
    let mut proxy_states: Vec<ProxyState> =
        (0..proxies).map(|p| ProxyState::new(p, tenant, quota / f64::from(proxies), &cfg, 0)).collect();
    let mut meta = MetaMonitor::new(cfg.meta_poll_period_us);
    meta.watch(tenant, quota, proxies);

    // Each proxy sees 900 req/s of 1-RU requests: 1.8x the tenant quota overall.
    let rate = 900u64;
    for sec in 0..20u64 {
        let mut admitted = 0;
        for i in 0..rate {
            let now = sec * SEC + i * SEC / rate;
            for (p, state) in proxy_states.iter_mut().enumerate() {
                if state.admit(1.0, now).is_admit() {
                    admitted += 1;
                    meta.record(tenant, p as u32, 1.0);
                }
            }
        }
        if ((sec + 1) * SEC).is_multiple_of(cfg.meta_poll_period_us) {
            for d in meta.tick() {
                for p in proxy_states.iter_mut() {
                    p.set_burst(d.burst_mode, (sec + 1) * SEC);
                }
            }
        }
        println!(
            "t={sec:>2}s admitted {admitted:>4}/{} (per-proxy ceiling {:.0} RU/s, burst {})",
            rate * u64::from(proxies),
            proxy_states[0].ceiling(),
            proxy_states[0].burst_mode()
        );
    }

    let q_p = 250.0;
    let mut gate = PartitionGate::new(PartitionId { tenant, index: 0 }, q_p, &cfg, 0);
    let offered = 2000u64;
    let admitted = (0..offered).filter(|i| gate.admit(1.0, 10 * SEC + i * SEC / offered).is_admit()).count();
    println!("partition with quota {q_p} RU/s admitted {admitted} of {offered} requests in one second");
}
