use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cost::CostModel;
use crate::baselines::{BaselineConfig, BaselineKind};
use crate::error::{Result, SairError};
use crate::experience::SelectionConfig;
use crate::policy::{ExplorationSchedule, LlmConfig, MockPolicy, ProbeKind};
use crate::reward::RewardConfig;
use crate::sim::{SimSettings, StageSpec, WorkloadPattern, N_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Full loop with the rule-based policy backend.
    SairMock,
    /// Full loop with a chat-completions endpoint.
    SairLlm,
    Static,
    HpaCpu,
    Threshold,
    Vpa,
}

impl ControllerKind {
    pub fn is_sair(self) -> bool {
        matches!(self, Self::SairMock | Self::SairLlm)
    }

    pub fn baseline(self) -> Option<BaselineKind> {
        match self {
            Self::Static => Some(BaselineKind::Static),
            Self::HpaCpu => Some(BaselineKind::HpaCpu),
            Self::Threshold => Some(BaselineKind::Threshold),
            Self::Vpa => Some(BaselineKind::Vpa),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SairMock => "sair_mock",
            Self::SairLlm => "sair_llm",
            Self::Static => "static",
            Self::HpaCpu => "hpa_cpu",
            Self::Threshold => "threshold",
            Self::Vpa => "vpa",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    Billable,
    #[default]
    Effective,
}

/// Reward settings as written in a scenario; unset fields take defaults derived from
/// the SLA target and the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardSection {
    pub t_sla_ms: f64,
    pub l_baseline_ms: Option<f64>,
    /// Cost budget per decision interval; the cost of running every stage at the
    /// replica cap when unset.
    pub c_budget: Option<f64>,
    pub w_latency: Option<f64>,
    pub w_cost: Option<f64>,
    pub w_proactive: Option<f64>,
    pub r_max: Option<f64>,
    pub alpha: Option<f64>,
    /// Cost accounting used inside the reward.
    pub cost_mode: CostMode,
    /// Experiences at or below this reward are not stored.
    pub r_min: f64,
}

impl Default for RewardSection {
    fn default() -> Self {
        Self {
            t_sla_ms: 500.0,
            l_baseline_ms: None,
            c_budget: None,
            w_latency: None,
            w_cost: None,
            w_proactive: None,
            r_max: None,
            alpha: None,
            cost_mode: CostMode::Effective,
            r_min: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Timing {
    /// Seconds between decisions.
    pub interval_s: f64,
    /// Part of the interval discarded before measuring.
    pub settle_s: f64,
    pub dt_s: f64,
    pub warmup_s: f64,
}

impl Default for Timing {
    fn default() -> Self {
        Self { interval_s: 30.0, settle_s: 20.0, dt_s: 0.1, warmup_s: 60.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub enabled: bool,
    /// Candidate count above which the oracle falls back to replica and rate actions.
    pub budget: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { enabled: false, budget: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerSection {
    pub kind: ControllerKind,
    pub probe: ProbeKind,
    pub exploration: ExplorationSchedule,
    pub selection: SelectionConfig<f64>,
    pub mock: MockPolicy,
    pub baseline: BaselineConfig,
    pub llm: LlmConfig,
    /// Scale-up and scale-down cooldowns for the validator.
    pub cooldown_up_s: f64,
    pub cooldown_down_s: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            kind: ControllerKind::SairMock,
            probe: ProbeKind::Uniform,
            exploration: ExplorationSchedule::default(),
            selection: SelectionConfig::default(),
            mock: MockPolicy::default(),
            baseline: BaselineConfig::default(),
            llm: LlmConfig::default(),
            cooldown_up_s: 60.0,
            cooldown_down_s: 120.0,
        }
    }
}

fn default_rounds() -> u64 {
    100
}

/// One experiment: pipeline, workload, controller and measurement settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "default_rounds")]
    pub rounds: u64,
    /// Master seed; arrival, service and policy streams derive from it.
    #[serde(default)]
    pub seed: u64,
    pub stages: Vec<StageSpec>,
    pub workload: WorkloadPattern,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub timing: Timing,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub reward: RewardSection,
    #[serde(default)]
    pub cost: CostModel,
    #[serde(default)]
    pub oracle: OracleConfig,
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SairError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SairError::Config(format!("cannot serialize scenario: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(SairError::Config(format!("scenario {}: no stages", self.name)));
        }
        for s in &self.stages {
            s.validate()?;
        }
        self.workload.validate()?;
        let t = &self.timing;
        if !(t.dt_s > 0.0 && t.interval_s > 0.0 && t.settle_s >= 0.0 && t.settle_s < t.interval_s && t.warmup_s >= 0.0) {
            return Err(SairError::Config("timing: need dt > 0 and 0 <= settle < interval".into()));
        }
        let steps = t.interval_s / t.dt_s;
        if (steps - steps.round()).abs() > 1e-6 || ((t.settle_s / t.dt_s) - (t.settle_s / t.dt_s).round()).abs() > 1e-6 {
            return Err(SairError::Config("timing: interval and settle must be multiples of dt".into()));
        }
        let c = &self.controller;
        if c.kind.is_sair() {
            c.exploration.validate()?;
            c.selection.validate()?;
        }
        if c.kind == ControllerKind::SairLlm && !(c.llm.timeout_s < t.interval_s) {
            return Err(SairError::Config("llm timeout must be shorter than the decision interval".into()));
        }
        c.baseline.validate()?;
        if c.cooldown_up_s < 0.0 || c.cooldown_down_s < 0.0 {
            return Err(SairError::Config("cooldowns must be non-negative".into()));
        }
        self.cost.validate()?;
        self.reward_config()?.validate()?;
        if self.oracle.enabled && self.oracle.budget == 0 {
            return Err(SairError::Config("oracle budget must be positive".into()));
        }
        Ok(())
    }

    /// Resolved reward configuration.
    pub fn reward_config(&self) -> Result<RewardConfig<f64>> {
        let r = &self.reward;
        if !(r.t_sla_ms > 0.0) {
            return Err(SairError::Config("reward.t_sla_ms must be positive".into()));
        }
        let c_budget = match r.c_budget {
            Some(c) => c,
            None => {
                let maxed: Vec<_> = self
                    .stages
                    .iter()
                    .map(|s| crate::sim::ResourceConfig { replicas: N_MAX, rate_ratio: 1.0, ..s.initial })
                    .collect();
                let kinds: Vec<_> = self.stages.iter().map(|s| s.kind).collect();
                self.cost.interval_cost(&maxed, &kinds, self.timing.interval_s, r.cost_mode)
            }
        };
        let mut cfg = RewardConfig::with_sla(r.t_sla_ms, c_budget);
        if let Some(v) = r.l_baseline_ms {
            cfg.l_baseline_ms = v;
        }
        if let Some(v) = r.w_latency {
            cfg.w_latency = v;
        }
        if let Some(v) = r.w_cost {
            cfg.w_cost = v;
        }
        if let Some(v) = r.w_proactive {
            cfg.w_proactive = v;
        }
        if let Some(v) = r.r_max {
            cfg.r_max = v;
        }
        if let Some(v) = r.alpha {
            cfg.alpha = v;
        }
        Ok(cfg)
    }

    /// Copy with a different master seed.
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Derived per-purpose seeds from a master seed.
pub(crate) fn derive_seed(master: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master.wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
