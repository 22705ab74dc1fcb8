use serde::{Deserialize, Serialize};

use super::config::CostMode;
use crate::error::{Result, SairError};
use crate::sim::{PipelineState, ResourceConfig, StageKind};

/// Resource prices. CPU is billed per allocated core, GPUs per replica (billable) or per
/// replica times rate ratio (effective).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    /// $ per core-hour.
    pub p_cpu: f64,
    /// $ per GPU-hour.
    pub p_gpu: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { p_cpu: 0.048, p_gpu: 3.06 }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_cpu > 0.0 && self.p_gpu > 0.0) {
            return Err(SairError::Config("prices must be positive".into()));
        }
        Ok(())
    }

    /// $ per hour for an allocation.
    pub fn hourly(&self, configs: &[ResourceConfig], kinds: &[StageKind], mode: CostMode) -> f64 {
        configs
            .iter()
            .zip(kinds)
            .map(|(c, k)| {
                let n = c.replicas as f64;
                let cpu = n * c.cpu_millicores as f64 / 1000.0 * self.p_cpu;
                let gpu = match (k, mode) {
                    (StageKind::Cpu, _) => 0.0,
                    (StageKind::Gpu, CostMode::Billable) => n * self.p_gpu,
                    (StageKind::Gpu, CostMode::Effective) => n * c.rate_ratio * self.p_gpu,
                };
                cpu + gpu
            })
            .sum()
    }

    /// $ spent over `dt_s` seconds.
    pub fn interval_cost(&self, configs: &[ResourceConfig], kinds: &[StageKind], dt_s: f64, mode: CostMode) -> f64 {
        self.hourly(configs, kinds, mode) * dt_s / 3600.0
    }

    pub fn cost(&self, state: &PipelineState, mode: CostMode, dt_s: f64) -> f64 {
        self.interval_cost(&state.configs(), &state.kinds(), dt_s, mode)
    }
}
