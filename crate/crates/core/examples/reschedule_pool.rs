//! Generates a skewed pool and converges it with the multi-resource planner.
//!
//! `cargo run --release --example reschedule_pool`

use abase_lite::reschedule::{converge, PoolGenerator, RescheduleConfig};

fn main() {
    let mut pool = PoolGenerator {
        name: "demo".into(),
        seed: 42,
        nodes: 40,
        tenants: 20,
        partitions_min: 4,
        partitions_max: 16,
        replicas: 3,
        ru_mu: 4.0,
        ru_sigma: 1.0,
        storage_mu: 22.0,
        storage_sigma: 1.0,
        diurnal_amplitude: 0.5,
        placement_skew: 12.0,
        target_ru_util: 0.45,
        target_storage_util: 0.55,
    }
    .generate();
    let before = pool.stats();
    let report = converge(&mut pool, &RescheduleConfig::default(), 50);
    for (i, r) in report.rounds.iter().enumerate() {
        println!("round {i}: {} moves, max loss {:.4} -> {:.4}", r.moves, r.max_loss_before, r.max_loss_after);
    }
    let after = pool.stats();
    println!("{} replica-count moves, {} balancing moves", report.phase1.len(), report.migrations.len());
    println!("RU util std {:.4} -> {:.4}", before.ru_util_std, after.ru_util_std);
    println!("storage util var {:.5} -> {:.5}", before.storage_util_var, after.storage_util_var);
}
