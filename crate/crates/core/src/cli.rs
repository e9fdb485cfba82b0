//! Command-line front end: simulation runs, offline rescheduling and
//! offline forecasting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autoscale::{decide, AutoscaleConfig, ScalingDecision, ScalingState};
use crate::domain::TenantId;
use crate::forecast::{forecast, ForecastConfig, ForecastError, ForecastResult, MetricSeries};
use crate::reschedule::{
    converge, inter_pool_reschedule, InterPoolOutcome, Migration, PoolError, PoolFile, PoolStats, RescheduleConfig,
};
use crate::scenario::{ScenarioConfig, ScenarioError};
use crate::sim::{self, RunSummary, SimError};

/// Environment variable holding the log filter.
pub const LOG_ENV: &str = "ABASE_LITE_LOG";

#[derive(Debug, Parser)]
#[command(name = "abase-lite", version, about = "Multi-tenant key-value store simulator and planners")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario and write metrics, summary and logs.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Plan replica migrations for a pool snapshot or generator recipe.
    Reschedule {
        #[arg(long)]
        pool_state: PathBuf,
        /// Maximum planning rounds per pool.
        #[arg(long, default_value_t = 50)]
        iterations: usize,
        /// Writes the migration plan as JSON lines.
        #[arg(long)]
        plan_out: Option<PathBuf>,
    },
    /// Forecast a usage series and recommend a quota.
    Forecast {
        #[arg(long)]
        series: PathBuf,
        /// Quota series aligned with the usage series.
        #[arg(long)]
        quota: Option<PathBuf>,
        #[arg(long, default_value_t = 168)]
        horizon: usize,
        /// Current tenant quota; defaults to the last quota sample.
        #[arg(long)]
        tenant_quota: Option<f64>,
        #[arg(long, default_value_t = 1)]
        partitions: u32,
        /// Writes the forecast document here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Forecast { path: String, source: ForecastError },
    #[error("{path}: {msg}")]
    PoolParse { path: String, msg: String },
    #[error(transparent)]
    Pool(#[from] PoolError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    /// 2 for bad input, 1 for failures during execution.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Scenario(_) | CliError::PoolParse { .. } | CliError::Pool(_) => 2,
            CliError::Forecast { source, .. } => match source {
                ForecastError::Io(_) => 1,
                _ => 2,
            },
            CliError::Sim(e) if e.is_config() => 2,
            CliError::Sim(_) | CliError::Io { .. } => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Runs a scenario and writes its outputs under `out`.
pub fn cmd_run(scenario: &Path, out: &Path, seed: Option<u64>) -> Result<RunSummary, CliError> {
    let mut cfg = ScenarioConfig::load(scenario)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let output = sim::run(&cfg)?;
    output.write_to(out).map_err(io_err(out))?;
    Ok(output.summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolReport {
    pub pool: String,
    pub before: PoolStats,
    pub after: PoolStats,
    pub replica_balance_moves: usize,
    pub rounds: usize,
    pub migrations: usize,
    pub ru_std_reduction: f64,
    pub storage_var_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescheduleReport {
    pub inter_pool: Option<InterPoolOutcome>,
    pub pools: Vec<PoolReport>,
    #[serde(skip)]
    pub plan: Vec<Migration>,
}

fn reduction(before: f64, after: f64) -> f64 {
    if before > 0.0 {
        1.0 - after / before
    } else {
        0.0
    }
}

/// Loads a pool file, rebalances across pools when there are several, then
/// converges each pool.
pub fn cmd_reschedule(pool_state: &Path, iterations: usize) -> Result<RescheduleReport, CliError> {
    let text = std::fs::read_to_string(pool_state).map_err(io_err(pool_state))?;
    let file: PoolFile = serde_json::from_str(&text).map_err(|e| CliError::PoolParse {
        path: pool_state.display().to_string(),
        msg: format!("line {} column {}: {e}", e.line(), e.column()),
    })?;
    let mut pools = file.into_pools()?;
    let cfg = RescheduleConfig::default();
    let mut plan = Vec::new();
    let before: Vec<PoolStats> = pools.iter().map(|p| p.stats()).collect();
    let inter_pool = (pools.len() > 1).then(|| {
        let o = inter_pool_reschedule(&mut pools, &cfg);
        plan.extend(o.drain_moves.iter().cloned());
        o
    });
    let mut reports = Vec::new();
    for (pool, before) in pools.iter_mut().zip(before) {
        let rep = converge(pool, &cfg, iterations);
        let after = pool.stats();
        reports.push(PoolReport {
            pool: pool.name.clone(),
            ru_std_reduction: reduction(before.ru_util_std, after.ru_util_std),
            storage_var_reduction: reduction(before.storage_util_var, after.storage_util_var),
            before,
            after,
            replica_balance_moves: rep.phase1.len(),
            rounds: rep.rounds.len(),
            migrations: rep.phase1.len() + rep.migrations.len(),
        });
        plan.extend(rep.phase1);
        plan.extend(rep.migrations);
    }
    Ok(RescheduleReport { inter_pool, pools: reports, plan })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastDocument {
    pub result: ForecastResult,
    pub tenant_quota: Option<f64>,
    pub recommendation: Option<ScalingDecision>,
    pub notices: Vec<String>,
}

fn read_series(path: &Path) -> Result<MetricSeries, CliError> {
    let wrap = |source| CliError::Forecast { path: path.display().to_string(), source };
    let f = File::open(path).map_err(|e| wrap(ForecastError::Io(e)))?;
    MetricSeries::read_csv(f).map_err(wrap)
}

/// Forecasts `series` and, when a current quota is known, runs the scaling
/// decision against the forecast peak.
pub fn cmd_forecast(
    series: &Path,
    quota: Option<&Path>,
    horizon: usize,
    tenant_quota: Option<f64>,
    partitions: u32,
) -> Result<ForecastDocument, CliError> {
    let usage = read_series(series)?;
    let quota_series = quota.map(read_series).transpose()?;
    let cfg = ForecastConfig { horizon, ..ForecastConfig::default() };
    let result = forecast(&usage, quota_series.as_ref(), &cfg)
        .map_err(|source| CliError::Forecast { path: series.display().to_string(), source })?;
    let mut notices = Vec::new();
    if result.fallback {
        notices.push(format!(
            "only {} hours of history (< {}): forecast uses the historical average alone",
            usage.len(),
            cfg.min_history
        ));
    }
    let current = tenant_quota.or_else(|| quota_series.as_ref().and_then(|q| q.values.last().copied()));
    let recommendation = current.map(|q| {
        let parts = partitions.max(1);
        let state = ScalingState {
            tenant: TenantId(0),
            tenant_quota: q,
            partitions: parts,
            partition_quota: q / f64::from(parts),
            last_scale_us: None,
        };
        decide(&state, result.u_max, 0, &AutoscaleConfig::default())
    });
    if current.is_none() {
        notices.push("no current quota given: skipping the scaling recommendation".into());
    }
    Ok(ForecastDocument { result, tenant_quota: current, recommendation, notices })
}

fn write_json_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for it in items {
        serde_json::to_writer(&mut w, it)
            .map_err(|e| CliError::Io { path: path.display().to_string(), source: e.into() })?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { scenario, out, seed } => {
            let s = cmd_run(&scenario, &out, seed)?;
            println!("scenario {} (seed {}) finished: {} events", s.scenario, s.seed, s.events);
            for t in &s.tenants {
                println!(
                    "  {:<12} offered {:>9}  success {:>9}  timed out {:>7}  p99 {} us",
                    t.name,
                    t.arrivals,
                    t.success,
                    t.timed_out,
                    t.p99_us.map_or("-".into(), |v| v.to_string())
                );
            }
            println!("outputs written to {}", out.display());
        }
        Command::Reschedule { pool_state, iterations, plan_out } => {
            let r = cmd_reschedule(&pool_state, iterations)?;
            if let Some(o) = &r.inter_pool {
                println!(
                    "inter-pool: gap {:.4} -> {:.4}, {} nodes reassigned",
                    o.gap_before,
                    o.gap_after,
                    o.reassignments.len()
                );
            }
            for p in &r.pools {
                println!(
                    "pool {}: {} migrations in {} rounds; RU util std {:.4} -> {:.4} ({:.1}% lower); storage util var {:.6} -> {:.6} ({:.1}% lower)",
                    p.pool,
                    p.migrations,
                    p.rounds,
                    p.before.ru_util_std,
                    p.after.ru_util_std,
                    100.0 * p.ru_std_reduction,
                    p.before.storage_util_var,
                    p.after.storage_util_var,
                    100.0 * p.storage_var_reduction
                );
            }
            match plan_out {
                Some(path) => write_json_lines(&path, &r.plan)?,
                None => {
                    for m in &r.plan {
                        println!("{}", serde_json::to_string(m).expect("migration serializes"));
                    }
                }
            }
        }
        Command::Forecast { series, quota, horizon, tenant_quota, partitions, out } => {
            let d = cmd_forecast(&series, quota.as_deref(), horizon, tenant_quota, partitions)?;
            for n in &d.notices {
                eprintln!("note: {n}");
            }
            let doc = serde_json::to_string_pretty(&d).expect("document serializes");
            match &out {
                Some(path) => std::fs::write(path, doc + "\n").map_err(io_err(path))?,
                None => println!("{doc}"),
            }
            println!("u_max = {:.3}", d.result.u_max);
            match &d.recommendation {
                Some(r) => println!(
                    "recommendation: {} (tenant quota {:.3}, partition quota {:.3}, partitions {})",
                    serde_json::to_string(&r.action).expect("action serializes").trim_matches('"'),
                    r.new_tenant_quota,
                    r.new_partition_quota,
                    r.new_partitions
                ),
                None => println!("recommendation: unavailable"),
            }
        }
    }
    Ok(())
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
