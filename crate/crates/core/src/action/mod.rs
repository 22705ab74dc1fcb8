//! Discrete scaling actions, proposal parsing and validation.

mod proposal;
mod validate;

pub use proposal::{absolute_to_delta, parse_proposal, AbsoluteProposal, StageTarget};
pub use validate::{snap_to_grid, validate, CooldownState, RawDeltas, RawStageDelta};

use serde::{Deserialize, Serialize};

use crate::reward::ActionMagnitude;
use crate::sim::{ResourceConfig, StageKind, CPU_MIN_MILLICORES, MEMORY_MIN_MB, N_MAX, N_MIN};
use crate::throttle::RHO_MIN;

pub const GAMMA_C: i32 = 500;
pub const GAMMA_M: i32 = 256;
/// One rate step is a tenth of full GPU rate.
pub const RATE_STEP: f64 = 0.1;

pub const REPLICA_GRID: [i32; 4] = [-1, 0, 1, 2];
pub const CPU_GRID: [i32; 3] = [-GAMMA_C, 0, GAMMA_C];
pub const MEMORY_GRID: [i32; 3] = [-GAMMA_M, 0, GAMMA_M];
/// Rate-ratio deltas in units of [`RATE_STEP`].
pub const RATE_GRID: [i32; 4] = [-1, 0, 1, 2];

/// Which component produced an executed action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionSource {
    Llm,
    Mock,
    Probe,
    Baseline,
    /// The policy backend failed and the round executed a no-op.
    Fallback,
}

impl ActionSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Llm => "llm",
            Self::Mock => "mock",
            Self::Probe => "probe",
            Self::Baseline => "baseline",
            Self::Fallback => "fallback",
        }
    }
}

/// Per-stage deltas on the action grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct StageDelta {
    pub replicas: i32,
    pub cpu_millicores: i32,
    pub memory_mb: i32,
    pub rate_steps: i32,
}

impl StageDelta {
    pub fn replicas(n: i32) -> Self {
        Self { replicas: n, ..Self::default() }
    }

    pub fn rate(steps: i32) -> Self {
        Self { rate_steps: steps, ..Self::default() }
    }

    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }

    pub fn rate_delta(&self) -> f64 {
        self.rate_steps as f64 * RATE_STEP
    }

    pub fn is_on_grid(&self, kind: StageKind) -> bool {
        let common = REPLICA_GRID.contains(&self.replicas);
        match kind {
            StageKind::Cpu => {
                common
                    && CPU_GRID.contains(&self.cpu_millicores)
                    && MEMORY_GRID.contains(&self.memory_mb)
                    && self.rate_steps == 0
            }
            StageKind::Gpu => {
                common && self.cpu_millicores == 0 && self.memory_mb == 0 && RATE_GRID.contains(&self.rate_steps)
            }
        }
    }

    /// Resulting allocation, with absolutes clamped to the resource bounds.
    pub fn apply(&self, config: &ResourceConfig, kind: StageKind) -> ResourceConfig {
        let replicas = (config.replicas as i64 + self.replicas as i64).clamp(N_MIN as i64, N_MAX as i64) as u32;
        let cpu = (config.cpu_millicores as i64 + self.cpu_millicores as i64).max(CPU_MIN_MILLICORES as i64) as u32;
        let mem = (config.memory_mb as i64 + self.memory_mb as i64).max(MEMORY_MIN_MB as i64) as u32;
        let rate_ratio = match kind {
            StageKind::Cpu => 1.0,
            StageKind::Gpu => round_rate((config.rate_ratio + self.rate_delta()).clamp(RHO_MIN, 1.0)),
        };
        ResourceConfig { replicas, cpu_millicores: cpu, memory_mb: mem, rate_ratio }
    }
}

/// Removes floating noise from repeated tenth-steps.
pub(crate) fn round_rate(r: f64) -> f64 {
    (r * 1e6).round() / 1e6
}

/// One delta per stage, in pipeline order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalingAction {
    pub stages: Vec<StageDelta>,
}

impl ScalingAction {
    pub fn noop(stages: usize) -> Self {
        Self { stages: vec![StageDelta::default(); stages] }
    }

    /// Single-stage action.
    pub fn single(stages: usize, stage: usize, delta: StageDelta) -> Self {
        let mut a = Self::noop(stages);
        a.stages[stage] = delta;
        a
    }

    pub fn is_noop(&self) -> bool {
        self.stages.iter().all(StageDelta::is_zero)
    }

    pub fn is_on_grid(&self, kinds: &[StageKind]) -> bool {
        self.stages.len() == kinds.len() && self.stages.iter().zip(kinds).all(|(d, k)| d.is_on_grid(*k))
    }

    /// Stage indices with a positive replica delta.
    pub fn scaled_up_stages(&self) -> impl Iterator<Item = usize> + '_ {
        self.stages.iter().enumerate().filter(|(_, d)| d.replicas > 0).map(|(i, _)| i)
    }

    pub fn apply(&self, configs: &[ResourceConfig], kinds: &[StageKind]) -> Vec<ResourceConfig> {
        configs
            .iter()
            .zip(kinds)
            .enumerate()
            .map(|(i, (c, k))| self.stages.get(i).map_or(*c, |d| d.apply(c, *k)))
            .collect()
    }

    pub fn magnitude(&self) -> ActionMagnitude<f64> {
        let mut m = ActionMagnitude::default();
        for d in &self.stages {
            m.replicas += d.replicas.abs() as f64;
            m.cpu_millicores += d.cpu_millicores.abs() as f64;
            m.memory_mb += d.memory_mb.abs() as f64;
            m.rate += d.rate_delta().abs();
            if !d.is_zero() {
                m.stages_scaled += 1;
            }
        }
        m
    }

    /// Every single-stage grid action for the given stage kinds, no-op first.
    pub fn enumerate_single_stage(kinds: &[StageKind]) -> Vec<ScalingAction> {
        let n = kinds.len();
        let mut out = vec![Self::noop(n)];
        for (i, kind) in kinds.iter().enumerate() {
            for d in stage_grid(*kind) {
                if !d.is_zero() {
                    out.push(Self::single(n, i, d));
                }
            }
        }
        out
    }
}

/// Every grid delta for one stage.
pub fn stage_grid(kind: StageKind) -> Vec<StageDelta> {
    let mut out = Vec::new();
    match kind {
        StageKind::Cpu => {
            for &replicas in &REPLICA_GRID {
                for &cpu_millicores in &CPU_GRID {
                    for &memory_mb in &MEMORY_GRID {
                        out.push(StageDelta { replicas, cpu_millicores, memory_mb, rate_steps: 0 });
                    }
                }
            }
        }
        StageKind::Gpu => {
            for &replicas in &REPLICA_GRID {
                for &rate_steps in &RATE_GRID {
                    out.push(StageDelta { replicas, rate_steps, ..StageDelta::default() });
                }
            }
        }
    }
    out
}
