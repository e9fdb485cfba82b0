//! Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs as a plain binary so the lines appear in order.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use abase_lite::autoscale::{decide, AutoscaleConfig, ScalingAction, ScalingState};
use abase_lite::cache::FanoutExperiment;
use abase_lite::domain::{RequestKind, TenantId};
use abase_lite::forecast::{forecast, mape, ForecastConfig, MetricSeries, SyntheticSeries};
use abase_lite::reschedule::{converge, intra_pool_reschedule, PoolFile, PoolState, RescheduleConfig};
use abase_lite::ru::{
    estimate_read_ru, ru_complex, ru_write, settle_complex, settle_read, ReadStats, RuConfig, ServedFrom,
};
use abase_lite::scenario::ScenarioConfig;
use abase_lite::sim::{self, DecisionRecord, RunOutput};
use serde_json::{json, Value};

type Criterion = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn scenario(name: &str) -> ScenarioConfig {
    let path = manifest_dir().join("scenarios").join(name);
    ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn run(cfg: &ScenarioConfig) -> RunOutput {
    sim::run(cfg).unwrap_or_else(|e| panic!("scenario {}: {e}", cfg.name))
}

fn inline(v: Value) -> ScenarioConfig {
    ScenarioConfig::from_json(&v.to_string(), "inline").expect("inline scenario is valid")
}

/// Success count of `tenant` for each second in `[from, to)`.
fn success_series(out: &RunOutput, tenant: &str, from: u64, to: u64) -> Vec<u64> {
    let t = out.tenant_index(tenant).expect("tenant exists");
    (from..to).map(|s| out.metrics.counters(s, t).success).collect()
}

fn mean(xs: &[u64]) -> f64 {
    xs.iter().sum::<u64>() as f64 / xs.len() as f64
}

fn criterion_1() -> Outcome {
    let mut fails = Vec::new();
    let mut check = |label: &str, ok: bool| {
        if !ok {
            fails.push(label.to_string());
        }
    };
    check("write 2048 B, 3 replicas", ru_write(2048, &RuConfig::with_replicas(3)) == 3);
    check("write 0 B, 1 replica", ru_write(0, &RuConfig::with_replicas(1)) == 1);
    check("write 3072 B, 2 replicas", ru_write(3072, &RuConfig::with_replicas(2)) == 4);

    let one = RuConfig::with_replicas(1);
    let mut half = ReadStats::new(2);
    half.update(4096, true);
    half.update(4096, false);
    check("estimate E[S]=4096 hit 0.5", estimate_read_ru(&half, &one) == 1.0);
    let mut hits = ReadStats::new(4);
    hits.update(4096, true);
    check("estimate hit ratio 1", estimate_read_ru(&hits, &one) == 0.0);
    let mut buf = ReadStats::new(8);
    buf.update(1024, false);
    buf.update(3072, false);
    check("estimate buffer {1024 miss, 3072 miss}", estimate_read_ru(&buf, &one) == 1.0);

    check("settle 2048 B from disk", settle_read(2048, ServedFrom::Disk, &one) == 1);
    check("settle from proxy cache", settle_read(2048, ServedFrom::ProxyCache, &one) == 0);
    check("settle 5000 B from node cache", settle_read(5000, ServedFrom::NodeCache, &one) == 3);

    let mut s = ReadStats::new(10);
    s.update(1024, false);
    check("stats after first sample", (s.expected_size(), s.hit_ratio()) == (1024.0, 0.0));
    let mut k2 = ReadStats::new(2);
    k2.update(1024, true);
    k2.update(3072, false);
    check("stats window 2", (k2.expected_size(), k2.hit_ratio()) == (2048.0, 0.5));
    let mut k1 = ReadStats::new(1);
    k1.update(1024, false);
    k1.update(6000, true);
    check("stats window 1 keeps last", (k1.expected_size(), k1.hit_ratio()) == (6000.0, 1.0));

    let empty = ReadStats::new(10);
    check("HLen", ru_complex(RequestKind::HLen, &empty, &one) == 1.0);
    check("HGetAll on empty hash", ru_complex(RequestKind::HGetAll, &empty, &one) == 1.0);
    let mut hashes = ReadStats::new(10);
    hashes.record_scan(4, 4 * 512);
    check("HGetAll len 4 field 512", ru_complex(RequestKind::HGetAll, &hashes, &one) == 2.0);
    check("settle HLen", settle_complex(RequestKind::HLen, 0, &one) == 1);
    check("settle HGetAll 2048 B", settle_complex(RequestKind::HGetAll, 2048, &one) == 2);

    if fails.is_empty() {
        outcome(true, "17 billing and estimate examples exact")
    } else {
        outcome(false, format!("mismatched: {}", fails.join(", ")))
    }
}

fn criterion_2() -> Outcome {
    let out = run(&scenario("fig7_proxy_quota.json"));
    let baseline = mean(&success_series(&out, "t2", 300, 600));
    let during = mean(&success_series(&out, "t2", 900, 2100));
    let recovered = success_series(&out, "t2", 2160, 2400);
    let t1_after = success_series(&out, "t1", 2160, 2400);
    let quota = out.world.tenants[out.tenant_index("t1").unwrap()].ru_quota;
    let min_recovered = *recovered.iter().min().unwrap() as f64;
    let max_t1 = *t1_after.iter().max().unwrap() as f64;
    let pass = baseline > 0.0
        && during < 0.2 * baseline
        && min_recovered >= 0.95 * baseline
        && max_t1 <= 1.05 * quota
        && out.summary.conservation_ok;
    outcome(
        pass,
        format!(
            "t2 baseline {baseline:.1}/s, burst {during:.1}/s ({:.1}%), min after 2160 s {min_recovered}/s; t1 max after 2160 s {max_t1}/s vs quota {quota}",
            100.0 * during / baseline
        ),
    )
}

fn criterion_3() -> Outcome {
    let out = run(&scenario("fig8_partition_wfq.json"));
    let steady = success_series(&out, "hot", 90, 180);
    let (lo, hi) = (*steady.iter().min().unwrap() as f64, *steady.iter().max().unwrap() as f64);
    let hot = out.tenant_index("hot").unwrap();
    let rejected = out.metrics.window(hot, 90, 180).rejected_partition_quota;
    let calm = out.tenant_index("calm").unwrap();
    let p99 = |from, to| sim::percentile(&out.metrics.latencies(calm, from, to), 0.99).unwrap_or(0);
    let (pre, burst) = (p99(10, 60), p99(70, 180));
    let pass = lo >= 2940.0 && hi <= 3060.0 && rejected > 0 && f64::from(burst) <= 1.5 * f64::from(pre);
    outcome(pass, format!("hot success {lo}..{hi}/s, {rejected} rejected; calm p99 {pre} us before, {burst} us during"))
}

fn base_topology(tenants: Value) -> Value {
    json!({
        "pools": [{"name": "pool", "nodes": [{"name": "dn0", "ru_capacity": 100000, "storage_capacity": 1e12}]}],
        "tenants": tenants,
        "replica_count": 1
    })
}

fn criterion_4() -> Outcome {
    let ratio_cfg = inline(json!({
        "name": "wfq_ratio", "duration_s": 40, "seed": 4,
        "topology": base_topology(json!([
            {"name": "a", "pool": "pool", "ru_quota": 2000, "partitions": 1},
            {"name": "b", "pool": "pool", "ru_quota": 1000, "partitions": 1}
        ])),
        "workloads": [
            {"tenant": "a", "arrival": {"kind": "constant", "rate": 1500}, "keys": {"kind": "uniform", "count": 1000000}},
            {"tenant": "b", "arrival": {"kind": "constant", "rate": 1500}, "keys": {"kind": "uniform", "count": 1000000}}
        ],
        "toggles": {"proxy_quota": false, "partition_quota": false, "proxy_cache": false,
                    "node_cache": false, "autoscaler": false, "rescheduler": false},
        "params": {"service": {"cpu_us_per_ru": 1000, "cpu_threads": 1, "io_threads": 8},
                   "client_timeout_ms": 100000}
    }));
    let out = run(&ratio_cfg);
    // Queues fill during the first seconds; after that both tenants stay backlogged.
    let a: u64 = success_series(&out, "a", 5, 40).iter().sum();
    let b: u64 = success_series(&out, "b", 5, 40).iter().sum();
    let ratio = a as f64 / b as f64;
    let ratio_ok = a + b >= 10_000 && (ratio - 2.0).abs() <= 0.1;

    let monopoly = |share: f64| {
        let cfg = inline(json!({
            "name": "rule3", "duration_s": 20, "seed": 5,
            "topology": base_topology(json!([
                {"name": "a", "pool": "pool", "ru_quota": 5000, "partitions": 1},
                {"name": "b", "pool": "pool", "ru_quota": 5000, "partitions": 1}
            ])),
            "workloads": [
                {"tenant": "a", "arrival": {"kind": "constant", "rate": 10000}, "keys": {"kind": "uniform", "count": 1000000}},
                {"tenant": "b", "arrival": {"kind": "constant", "rate": 50}, "keys": {"kind": "uniform", "count": 1000000}}
            ],
            "toggles": {"proxy_quota": false, "partition_quota": false, "proxy_cache": false,
                        "node_cache": false, "autoscaler": false, "rescheduler": false},
            "params": {"service": {"cpu_us_per_ru": 20, "cpu_threads": 8, "io_threads": 2, "io_us_per_iops": 500},
                       "wfq": {"max_tenant_share": share}}
        }));
        run(&cfg).tenant("b").expect("tenant b").max_cpu_wait_us
    };
    let (with_rule, without_rule) = (monopoly(0.9), monopoly(1.0));
    outcome(
        ratio_ok && without_rule > with_rule,
        format!(
            "steady completions {a}:{b} = {ratio:.4}; co-tenant max wait {with_rule} us with the share cap, {without_rule} us without"
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut reports = Vec::new();
    for n in [1, 5, 15, 75] {
        let exp = FanoutExperiment {
            requests: 1_000_000,
            keys: 100_000,
            zipf_exponent: 1.0,
            proxies: 75,
            groups: n,
            cache_objects: 100,
            seed: 55,
        };
        reports.push(exp.run().expect("75 divides evenly"));
    }
    let monotone = reports.windows(2).all(|w| w[1].hit_ratio >= w[0].hit_ratio);
    let r15 = &reports[2];
    let bound = r15.hot_key_requests as f64 / (75.0 / 15.0) * 1.2;
    let ratios: Vec<String> = reports.iter().map(|r| format!("n={} {:.4}", r.groups, r.hit_ratio)).collect();
    outcome(
        monotone && r15.hot_key_peak_per_proxy as f64 <= bound,
        format!(
            "hit ratios [{}]; hot-key peak per proxy at n=15 {} <= {bound:.0}",
            ratios.join(", "),
            r15.hot_key_peak_per_proxy
        ),
    )
}

fn criterion_6() -> Outcome {
    let misses = |refresh: bool| {
        let cfg = inline(json!({
            "name": "aulru", "duration_s": 300, "seed": 6,
            "topology": base_topology(json!([{"name": "hot", "pool": "pool", "ru_quota": 10000, "partitions": 1}])),
            "workloads": [
                {"tenant": "hot", "arrival": {"kind": "constant", "rate": 100},
                 "keys": {"kind": "uniform", "count": 1}, "ttl_s": 10}
            ],
            "toggles": {"autoscaler": false, "rescheduler": false},
            "params": {"cache": {"active_refresh": refresh}}
        }));
        let out = run(&cfg);
        let t = out.tenant("hot").expect("tenant hot");
        // Client-visible misses: requests not answered by the proxy cache.
        t.arrivals - t.terminals.get(&sim::Terminal::ProxyCache).copied().unwrap_or(0)
    };
    let (on, off) = (misses(true), misses(false));
    outcome(
        on == 1 && off >= 30,
        format!("misses with refresh {on} (first fill only), without refresh {off} ({} after first fill)", off - 1),
    )
}

fn load_pools(name: &str) -> Vec<PoolState> {
    let path = manifest_dir().join("scenarios/pools").join(name);
    let text = std::fs::read_to_string(&path).expect("pool file");
    let file: PoolFile = serde_json::from_str(&text).expect("pool file parses");
    file.into_pools().expect("pool builds")
}

/// Brute-force best move on the snapshot, computed straight from the JSON.
/// Ties on gain go to the destination with the lower RU utilization, then
/// the lower node id. Also returns how many moves share the best gain.
fn oracle_move(path: &Path) -> Option<((u32, u32, u32, f64), usize)> {
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let pool = &doc["snapshot"]["pools"][0];
    let nodes = pool["nodes"].as_array().unwrap();
    let cap_ru: Vec<f64> = nodes.iter().map(|n| n["ru_capacity"].as_f64().unwrap()).collect();
    let cap_st: Vec<f64> = nodes.iter().map(|n| n["storage_capacity"].as_f64().unwrap()).collect();
    let node_ids: Vec<u64> = nodes.iter().map(|n| n["id"].as_u64().unwrap()).collect();
    struct Rep {
        tenant: u64,
        partition: u64,
        node: usize,
        ru: Vec<f64>,
        st: Vec<f64>,
    }
    let vec_of = |v: &Value| v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect::<Vec<f64>>();
    let reps: Vec<Rep> = pool["replicas"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| Rep {
            tenant: r["tenant"].as_u64().unwrap(),
            partition: r["partition"].as_u64().unwrap(),
            node: node_ids.iter().position(|id| *id == r["node"].as_u64().unwrap()).unwrap(),
            ru: vec_of(&r["ru"]),
            st: vec_of(&r["storage"]),
        })
        .collect();
    let n = nodes.len();
    // Per-node slot sums given an assignment.
    let sums = |assign: &[usize]| {
        let mut ru = vec![[0.0f64; 24]; n];
        let mut st = vec![[0.0f64; 24]; n];
        for (r, &node) in reps.iter().zip(assign) {
            for h in 0..24 {
                ru[node][h] += r.ru[h];
                st[node][h] += r.st[h];
            }
        }
        (ru, st)
    };
    let peak = |v: &[f64; 24]| v.iter().copied().fold(0.0, f64::max);
    let home: Vec<usize> = reps.iter().map(|r| r.node).collect();
    let (ru0, st0) = sums(&home);
    let mut total_ru = [0.0; 24];
    let mut total_st = [0.0; 24];
    for i in 0..n {
        for h in 0..24 {
            total_ru[h] += ru0[i][h];
            total_st[h] += st0[i][h];
        }
    }
    let target_r = peak(&total_ru) / cap_ru.iter().sum::<f64>();
    let target_s = peak(&total_st) / cap_st.iter().sum::<f64>();
    let node_loss = |ru: &[[f64; 24]], st: &[[f64; 24]], i: usize| {
        ((peak(&ru[i]) / cap_ru[i] - target_r).powi(2) + (peak(&st[i]) / cap_st[i] - target_s).powi(2)).sqrt()
    };
    let mut feasible: Vec<(u32, usize, usize, f64)> = Vec::new();
    for (ri, r) in reps.iter().enumerate() {
        for dst in 0..n {
            if dst == r.node {
                continue;
            }
            let sibling = reps
                .iter()
                .enumerate()
                .any(|(j, o)| j != ri && o.node == dst && o.tenant == r.tenant && o.partition == r.partition);
            if sibling {
                continue;
            }
            let mut assign = home.clone();
            assign[ri] = dst;
            let (ru1, st1) = sums(&assign);
            if peak(&ru1[dst]) / cap_ru[dst] > target_r || peak(&st1[dst]) > cap_st[dst] {
                continue;
            }
            let before = node_loss(&ru0, &st0, r.node).max(node_loss(&ru0, &st0, dst));
            let after = node_loss(&ru1, &st1, r.node).max(node_loss(&ru1, &st1, dst));
            let gain = before - after;
            if gain > 0.0 {
                feasible.push((r.tenant as u32, r.node, dst, gain));
            }
        }
    }
    let top = feasible.iter().map(|m| m.3).fold(f64::NEG_INFINITY, f64::max);
    let mut tied: Vec<_> = feasible.into_iter().filter(|m| top - m.3 <= 1e-12).collect();
    let ties = tied.len();
    tied.sort_by(|a, b| {
        (peak(&ru0[a.2]) / cap_ru[a.2])
            .total_cmp(&(peak(&ru0[b.2]) / cap_ru[b.2]))
            .then(node_ids[a.2].cmp(&node_ids[b.2]))
    });
    tied.first().map(|m| ((m.0, node_ids[m.1] as u32, node_ids[m.2] as u32, m.3), ties))
}

fn criterion_7() -> Outcome {
    let cfg = RescheduleConfig::default();
    let mut pools = load_pools("fig10_pool.json");
    let pool = &mut pools[0];
    let before = pool.stats();
    let report = converge(pool, &cfg, 50);
    let after = pool.stats();
    let ru_cut = 1.0 - after.ru_util_std / before.ru_util_std;
    let st_cut = 1.0 - after.storage_util_var / before.storage_util_var;
    let mut audit_ok = !report.rounds.is_empty();
    let mut prev_after = f64::INFINITY;
    let mut worst_gain_err: f64 = 0.0;
    for r in &report.rounds {
        audit_ok &= r.max_loss_after <= r.max_loss_before + 1e-12 && r.max_loss_before <= prev_after + 1e-12;
        worst_gain_err = worst_gain_err.max(r.gain_error);
        prev_after = r.max_loss_after;
    }
    audit_ok &= worst_gain_err <= 1e-9;

    let oracle_path = manifest_dir().join("scenarios/pools/oracle_5node.json");
    let mut small = load_pools("oracle_5node.json").remove(0);
    let plan = intra_pool_reschedule(&mut small, &cfg);
    let chosen = plan.first().map(|m| (m.replica.tenant, m.src, m.dst, m.gain));
    let expected = oracle_move(&oracle_path);
    let oracle_ok = match (chosen, expected) {
        (Some(c), Some((e, _))) => (c.0, c.1, c.2) == (e.0, e.1, e.2) && (c.3 - e.3).abs() <= 1e-9,
        _ => false,
    };
    outcome(
        ru_cut >= 0.5 && st_cut >= 0.6 && audit_ok && oracle_ok,
        format!(
            "RU std {:.4} -> {:.4} ({:.1}% lower), storage var {:.5} -> {:.5} ({:.1}% lower), {} rounds audited, max gain error {worst_gain_err:.1e}; 5-node planner {chosen:?} vs oracle {:?} ({} tied at best gain)",
            before.ru_util_std,
            after.ru_util_std,
            100.0 * ru_cut,
            before.storage_util_var,
            after.storage_util_var,
            100.0 * st_cut,
            report.rounds.len(),
            expected.map(|e| e.0),
            expected.map_or(0, |e| e.1)
        ),
    )
}

fn criterion_8() -> Outcome {
    let history = 720;
    let horizon = 168;
    let gen = |noise: f64| SyntheticSeries {
        hours: history,
        base: 100.0,
        amplitude: 50.0,
        period_hours: 24.0,
        growth_per_hour: 1.25,
        noise,
        seed: 808,
    };
    let cfg = ForecastConfig { horizon, ..ForecastConfig::default() };
    let err = |noise: f64| {
        let g = gen(noise);
        let res = forecast(&MetricSeries::new(0, g.range(0, history)), None, &cfg).expect("forecast");
        (mape(&res.forecast, &g.range(history, history + horizon)), res)
    };
    let (clean_err, clean) = err(0.0);
    let (noisy_err, _) = err(0.05);

    let quota = 1400.0;
    let last_day_peak = gen(0.0).range(history - 24, history).into_iter().fold(0.0, f64::max);
    let crossing = last_day_peak < 0.85 * quota && clean.u_max > 0.85 * quota;
    let state = ScalingState {
        tenant: TenantId(0),
        tenant_quota: quota,
        partitions: 4,
        partition_quota: quota / 4.0,
        last_scale_us: None,
    };
    let d = decide(&state, clean.u_max, 0, &AutoscaleConfig::default());
    let expected_q = clean.u_max / 0.65;
    let decision_ok =
        d.action == ScalingAction::ScaleUp && ((d.new_tenant_quota - expected_q) / expected_q).abs() <= 1e-3;

    let out = run(&scenario("elasticity_case.json"));
    let t = out.tenant("growth").expect("tenant growth");
    let throttled: u64 = t.terminals.iter().filter(|(k, _)| !k.is_served()).map(|(_, v)| *v).sum::<u64>() + t.timed_out;
    let first_up = out.decisions.iter().find_map(|d| match d {
        DecisionRecord::Autoscale { action, .. } => Some(*action == ScalingAction::ScaleUp),
        _ => None,
    });
    outcome(
        clean_err <= 0.10 && noisy_err <= 0.20 && crossing && decision_ok && throttled == 0 && first_up == Some(true),
        format!(
            "MAPE {:.2}% clean, {:.2}% at 5% noise; U_max {:.1} vs 0.85 x quota {:.0}; new quota {:.2} (expected {expected_q:.2}); continuation throttled {throttled}",
            100.0 * clean_err,
            100.0 * noisy_err,
            clean.u_max,
            0.85 * quota,
            d.new_tenant_quota
        ),
    )
}

fn bundled_scenarios() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(manifest_dir().join("scenarios"))
        .expect("scenario dir")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    v
}

fn output_files(out: &RunOutput) -> BTreeMap<String, Vec<u8>> {
    let dir = tempfile::tempdir().expect("temp dir");
    out.write_to(dir.path()).expect("outputs written");
    std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect()
}

fn criteria_9_and_10() -> (Outcome, Outcome) {
    let mut differing = Vec::new();
    let mut failing = Vec::new();
    let mut arrivals = 0u64;
    let paths = bundled_scenarios();
    for path in &paths {
        let cfg = ScenarioConfig::load(path).expect("bundled scenario loads");
        let first = sim::run(&cfg);
        let second = sim::run(&cfg);
        match (first, second) {
            (Ok(a), Ok(b)) => {
                if output_files(&a) != output_files(&b) {
                    differing.push(cfg.name.clone());
                }
                if !a.summary.conservation_ok {
                    failing.push(format!("{}: {:?}", cfg.name, a.summary.conservation_issues));
                }
                arrivals += a.summary.tenants.iter().map(|t| t.arrivals).sum::<u64>();
            }
            (Err(e), _) | (_, Err(e)) => failing.push(format!("{}: {e}", cfg.name)),
        }
    }
    let det = outcome(
        differing.is_empty() && failing.is_empty(),
        if differing.is_empty() {
            format!("{} bundled scenarios byte-identical on rerun", paths.len())
        } else {
            format!("outputs differ: {}", differing.join(", "))
        },
    );
    let cons = outcome(
        failing.is_empty(),
        if failing.is_empty() {
            format!("{arrivals} arrivals across {} scenarios each in exactly one terminal", paths.len())
        } else {
            failing.join("; ")
        },
    );
    (det, cons)
}

fn main() -> ExitCode {
    let mut all_pass = true;
    let mut report = |n: u32, budget: Option<Duration>, elapsed: Duration, o: Outcome| {
        let in_time = budget.is_none_or(|b| elapsed <= b);
        let pass = o.pass && in_time;
        all_pass &= pass;
        let budget_note = budget.map_or(String::new(), |b| format!(" / {} s", b.as_secs()));
        println!(
            "criterion {n}: {} {} [{:.2} s{budget_note}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64()
        );
    };
    let timed = |f: Criterion| {
        let t = Instant::now();
        let o = f();
        (o, t.elapsed())
    };
    let secs = Duration::from_secs;
    let budgets: [(u32, Criterion, u64); 8] = [
        (1, criterion_1, 1),
        (2, criterion_2, 30),
        (3, criterion_3, 30),
        (4, criterion_4, 30),
        (5, criterion_5, 60),
        (6, criterion_6, 10),
        (7, criterion_7, 60),
        (8, criterion_8, 20),
    ];
    for (n, f, budget) in budgets {
        let (o, elapsed) = timed(f);
        report(n, Some(secs(budget)), elapsed, o);
    }
    let t = Instant::now();
    let (det, cons) = criteria_9_and_10();
    let elapsed = t.elapsed();
    report(9, None, elapsed, det);
    report(10, None, elapsed, cons);
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
