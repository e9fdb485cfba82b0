//! Runs a bundled scenario through the simulator and prints per-tenant results.
//!
//! `cargo run --release --example run_scenario -- scenarios/fig8_partition_wfq.json`

use std::path::PathBuf;

use abase_lite::scenario::ScenarioConfig;
use abase_lite::sim;

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/fig8_partition_wfq.json"));
    let cfg = ScenarioConfig::load(&path).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(2);
    });
    let out = sim::run(&cfg).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(1);
    });
    let s = &out.summary;
    println!("{}: {} events, conservation {}", s.scenario, s.events, if s.conservation_ok { "ok" } else { "FAILED" });
    for t in &s.tenants {
        println!(
            "{:<10} arrivals {:>8}  success {:>8}  p50 {:>6?} us  p99 {:>8?} us  terminals {:?}",
            t.name, t.arrivals, t.success, t.p50_us, t.p99_us, t.terminals
        );
    }
    println!(
        "Little's law: L = {:.2}, lambda x W = {:.2} (relative error {:.3})",
        s.littles_law.mean_in_system,
        s.littles_law.arrival_rate * s.littles_law.mean_sojourn_s,
        s.littles_law.relative_error
    );
}
