//! CPU-layer weighted fair queueing: two backlogged tenants with partition
//! quotas 2:1 share one worker in that proportion.
//!
//! `cargo run --example wfq_fairness`

use abase_lite::domain::TenantId;
use abase_lite::wfq::{CpuScheduler, Discipline, QueueClass, WfqLimits};

fn main() {
    let quotas = [(TenantId(0), 2000.0), (TenantId(1), 1000.0)];
    let node_sum: f64 = quotas.iter().map(|q| q.1).sum();
    for discipline in [Discipline::Vft, Discipline::Fifo] {
        let mut cpu: CpuScheduler<u32> = CpuScheduler::new(discipline, WfqLimits::default());
        for i in 0..3000u32 {
            for (tenant, quota) in quotas {
                cpu.queues.enqueue(i, tenant, QueueClass::ReadSmall, 1.0, quota, node_sum).unwrap();
            }
        }
        let mut served = [0u32; 2];
        for _ in 0..3000 {
            let e = cpu.dequeue().expect("backlogged");
            served[e.tenant.0 as usize] += 1;
            cpu.complete(e.tenant, e.class, e.cost);
        }
        println!(
            "{discipline:?}: first 3000 completions split {}:{} (ratio {:.3})",
            served[0],
            served[1],
            f64::from(served[0]) / f64::from(served[1])
        );
    }
}
