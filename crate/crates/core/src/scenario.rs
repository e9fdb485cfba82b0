//! Scenario files: topology, workloads, feature toggles and parameter
//! overrides for one simulated run.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admission::AdmissionConfig;
use crate::autoscale::AutoscaleConfig;
use crate::domain::TopologySpec;
use crate::forecast::{ForecastConfig, SyntheticSeries};
use crate::reschedule::RescheduleConfig;
use crate::sim::{ServiceModel, WorkloadProfile};
use crate::wfq::WfqLimits;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}:{line}:{column}: {msg}")]
    Parse { path: String, line: usize, column: usize, msg: String },
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn on() -> bool {
    true
}

/// Mechanism switches. Everything is on unless a scenario turns it off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Toggles {
    #[serde(default = "on")]
    pub proxy_quota: bool,
    #[serde(default = "on")]
    pub partition_quota: bool,
    /// Off serves node queues in arrival order without the fairness rules.
    #[serde(default = "on")]
    pub wfq: bool,
    #[serde(default = "on")]
    pub proxy_cache: bool,
    #[serde(default = "on")]
    pub node_cache: bool,
    #[serde(default = "on")]
    pub autoscaler: bool,
    #[serde(default = "on")]
    pub rescheduler: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles {
            proxy_quota: true,
            partition_quota: true,
            wfq: true,
            proxy_cache: true,
            node_cache: true,
            autoscaler: true,
            rescheduler: true,
        }
    }
}

/// Toggles that may change while a run is in progress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Toggle {
    ProxyQuota,
    PartitionQuota,
    ProxyCache,
    NodeCache,
    Autoscaler,
    Rescheduler,
}

impl Toggles {
    pub fn set(&mut self, t: Toggle, enabled: bool) {
        match t {
            Toggle::ProxyQuota => self.proxy_quota = enabled,
            Toggle::PartitionQuota => self.partition_quota = enabled,
            Toggle::ProxyCache => self.proxy_cache = enabled,
            Toggle::NodeCache => self.node_cache = enabled,
            Toggle::Autoscaler => self.autoscaler = enabled,
            Toggle::Rescheduler => self.rescheduler = enabled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToggleChange {
    pub at_s: f64,
    pub toggle: Toggle,
    pub enabled: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuParams {
    pub unit_size: u64,
    pub window_k: usize,
    pub cold_start_ru: f64,
}

impl Default for RuParams {
    fn default() -> Self {
        let d = crate::ru::RuConfig::default();
        RuParams { unit_size: d.unit_size, window_k: d.window_k, cold_start_ru: d.cold_start_ru }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheParams {
    /// Capacity of each proxy's cache.
    pub proxy_cache_bytes: u64,
    /// Capacity of each data node's cache.
    pub node_cache_bytes: u64,
    pub refresh_window_s: f64,
    pub hot_threshold: u32,
    pub active_refresh: bool,
    pub node_hit_half_life_s: f64,
}

impl Default for CacheParams {
    fn default() -> Self {
        CacheParams {
            proxy_cache_bytes: 1 << 30,
            node_cache_bytes: 256 << 20,
            refresh_window_s: 5.0,
            hot_threshold: 3,
            active_refresh: true,
            node_hit_half_life_s: 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub ru: RuParams,
    pub admission: AdmissionConfig,
    pub wfq: WfqLimits,
    pub service: ServiceModel,
    pub cache: CacheParams,
    pub forecast: ForecastConfig,
    pub autoscale: AutoscaleConfig,
    pub reschedule: RescheduleConfig,
    /// Responses arriving later than this count as timed out.
    pub client_timeout_ms: f64,
    /// Requests one tenant may have waiting in a node's queues.
    pub queue_cap_per_tenant: usize,
    /// Length of one load-vector slot.
    pub load_slot_s: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            ru: RuParams::default(),
            admission: AdmissionConfig::default(),
            wfq: WfqLimits::default(),
            service: ServiceModel::default(),
            cache: CacheParams::default(),
            forecast: ForecastConfig::default(),
            autoscale: AutoscaleConfig::default(),
            reschedule: RescheduleConfig::default(),
            client_timeout_ms: 1000.0,
            queue_cap_per_tenant: 2000,
            load_slot_s: 3600.0,
        }
    }
}

/// Usage history handed to the autoscaler before the run starts. Exactly
/// one of `synthetic` and `values` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TenantHistory {
    pub tenant: String,
    #[serde(default)]
    pub synthetic: Option<SyntheticSeries>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

impl TenantHistory {
    pub fn series(&self) -> Vec<f64> {
        match (&self.synthetic, &self.values) {
            (Some(s), _) => s.generate().values,
            (None, Some(v)) => v.clone(),
            (None, None) => Vec::new(),
        }
    }
}

fn default_epoch() -> f64 {
    3600.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoscaleSetup {
    /// Simulated seconds per forecast hour.
    #[serde(default = "default_epoch")]
    pub epoch_s: f64,
    #[serde(default)]
    pub histories: Vec<TenantHistory>,
}

impl Default for AutoscaleSetup {
    fn default() -> Self {
        AutoscaleSetup { epoch_s: default_epoch(), histories: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    pub topology: TopologySpec,
    pub workloads: Vec<WorkloadProfile>,
    #[serde(default)]
    pub toggles: Toggles,
    #[serde(default)]
    pub toggle_changes: Vec<ToggleChange>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub autoscale: AutoscaleSetup,
}

impl ScenarioConfig {
    /// Parses and validates; `origin` names the source in diagnostics.
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ScenarioError> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: p.clone(), source })?;
        Self::from_json(&text, &p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn duration_us(&self) -> u64 {
        (self.duration_s * 1e6).round() as u64
    }

    /// Lists every problem found, each prefixed by its field path.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut errs = Vec::new();
        if let Err(crate::domain::DomainError::Validation(v)) = self.topology.validate() {
            errs.extend(v.into_iter().map(|e| format!("topology: {e}")));
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            errs.push(format!("duration_s: must be > 0, got {}", self.duration_s));
        }
        let tenant_known = |name: &str| self.topology.tenants.iter().any(|t| t.name == name);
        for (i, t) in self.topology.tenants.iter().enumerate() {
            if !(t.ru_quota > 0.0) {
                errs.push(format!("topology.tenants[{i}].ru_quota: must be > 0, got {}", t.ru_quota));
            }
        }
        for (i, w) in self.workloads.iter().enumerate() {
            let path = format!("workloads[{i}]");
            if !tenant_known(&w.tenant) {
                errs.push(format!("{path}.tenant: unknown tenant {:?}", w.tenant));
            }
            w.validate(&path, &mut errs);
        }
        for (i, c) in self.toggle_changes.iter().enumerate() {
            if !(c.at_s >= 0.0 && c.at_s <= self.duration_s) {
                errs.push(format!("toggle_changes[{i}].at_s: {} is outside the run", c.at_s));
            }
        }
        for (i, h) in self.autoscale.histories.iter().enumerate() {
            let path = format!("autoscale.histories[{i}]");
            if !tenant_known(&h.tenant) {
                errs.push(format!("{path}.tenant: unknown tenant {:?}", h.tenant));
            }
            if h.synthetic.is_some() == h.values.is_some() {
                errs.push(format!("{path}: set exactly one of synthetic or values"));
            }
        }
        if !(self.autoscale.epoch_s > 0.0) {
            errs.push(format!("autoscale.epoch_s: must be > 0, got {}", self.autoscale.epoch_s));
        }
        let p = &self.params;
        p.service.validate("params.service", &mut errs);
        if !(p.client_timeout_ms > 0.0) {
            errs.push("params.client_timeout_ms: must be > 0".into());
        }
        if p.queue_cap_per_tenant == 0 {
            errs.push("params.queue_cap_per_tenant: must be > 0".into());
        }
        if !(p.load_slot_s > 0.0) {
            errs.push("params.load_slot_s: must be > 0".into());
        }
        if p.ru.unit_size == 0 || p.ru.window_k == 0 {
            errs.push("params.ru: unit_size and window_k must be > 0".into());
        }
        if p.admission.bucket_window_us == 0 || p.admission.meta_poll_period_us == 0 {
            errs.push("params.admission: bucket_window_us and meta_poll_period_us must be > 0".into());
        }
        if p.reschedule.tick_us == 0 || !(p.reschedule.migration_bandwidth > 0.0) {
            errs.push("params.reschedule: tick_us and migration_bandwidth must be > 0".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid(errs))
        }
    }
}
