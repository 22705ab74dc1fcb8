use serde::{Deserialize, Serialize};

use crate::error::{Result, SairError};
use crate::throttle::RHO_MIN;

pub const N_MIN: u32 = 1;
pub const N_MAX: u32 = 8;
pub const CPU_MIN_MILLICORES: u32 = 100;
pub const MEMORY_MIN_MB: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    Cpu,
    Gpu,
}

/// Allocation of one stage: `(n, c, m, rho)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceConfig {
    pub replicas: u32,
    pub cpu_millicores: u32,
    pub memory_mb: u32,
    /// GPU rate ratio. Always 1.0 for CPU stages.
    pub rate_ratio: f64,
}

impl Default for ResourceConfig {
    fn default() -> Self {
        Self { replicas: 1, cpu_millicores: 1000, memory_mb: 1024, rate_ratio: 1.0 }
    }
}

impl ResourceConfig {
    pub fn validate(&self, kind: StageKind) -> Result<()> {
        if !(N_MIN..=N_MAX).contains(&self.replicas) {
            return Err(SairError::Config(format!(
                "replicas {} outside [{N_MIN}, {N_MAX}]",
                self.replicas
            )));
        }
        if self.cpu_millicores < CPU_MIN_MILLICORES {
            return Err(SairError::Config(format!(
                "cpu_millicores {} below {CPU_MIN_MILLICORES}",
                self.cpu_millicores
            )));
        }
        if self.memory_mb < MEMORY_MIN_MB {
            return Err(SairError::Config(format!(
                "memory_mb {} below {MEMORY_MIN_MB}",
                self.memory_mb
            )));
        }
        match kind {
            StageKind::Gpu if !(RHO_MIN..=1.0).contains(&self.rate_ratio) => Err(
                SairError::Config(format!("rate_ratio {} outside [{RHO_MIN}, 1]", self.rate_ratio)),
            ),
            StageKind::Cpu if self.rate_ratio != 1.0 => {
                Err(SairError::Config("CPU stages must have rate_ratio 1.0".into()))
            }
            _ => Ok(()),
        }
    }
}

fn default_reference_millicores() -> f64 {
    1000.0
}
fn default_cpu_sensitivity() -> f64 {
    0.5
}
fn default_memory_floor() -> f64 {
    256.0
}
fn default_kernel_blocks() -> u32 {
    50
}

/// Static description of one pipeline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub name: String,
    pub kind: StageKind,
    /// Requests per second per replica at the reference allocation.
    pub base_service_rate: f64,
    /// CPU allocation at which the service-rate multiplier is 1.
    #[serde(default = "default_reference_millicores")]
    pub reference_millicores: f64,
    /// Log-slope of the CPU multiplier above the reference allocation.
    #[serde(default = "default_cpu_sensitivity")]
    pub cpu_sensitivity: f64,
    #[serde(default = "default_memory_floor")]
    pub memory_floor_mb: f64,
    /// Maximum buffered requests; `None` is unbounded.
    #[serde(default)]
    pub queue_capacity: Option<usize>,
    /// Grid blocks per kernel launch (GPU stages).
    #[serde(default = "default_kernel_blocks")]
    pub kernel_blocks: u32,
    #[serde(default)]
    pub initial: ResourceConfig,
}

impl StageSpec {
    pub fn cpu(name: &str, base_service_rate: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: StageKind::Cpu,
            base_service_rate,
            reference_millicores: default_reference_millicores(),
            cpu_sensitivity: default_cpu_sensitivity(),
            memory_floor_mb: default_memory_floor(),
            queue_capacity: None,
            kernel_blocks: default_kernel_blocks(),
            initial: ResourceConfig::default(),
        }
    }

    pub fn gpu(name: &str, base_service_rate: f64) -> Self {
        Self { kind: StageKind::Gpu, ..Self::cpu(name, base_service_rate) }
    }

    pub fn with_initial(mut self, initial: ResourceConfig) -> Self {
        self.initial = initial;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_service_rate > 0.0) {
            return Err(SairError::Config(format!(
                "stage {}: base_service_rate must be positive",
                self.name
            )));
        }
        if !(self.reference_millicores > 0.0) || self.cpu_sensitivity < 0.0 {
            return Err(SairError::Config(format!("stage {}: invalid CPU curve", self.name)));
        }
        if self.kernel_blocks == 0 {
            return Err(SairError::Config(format!("stage {}: kernel_blocks is zero", self.name)));
        }
        self.initial.validate(self.kind)
    }

    /// Service-rate multiplier for an allocation:
    /// `min(c/c_ref, 1 + s*log2(c/c_ref))` clamped to `[0.25, 2]`, halved when memory is
    /// below the floor.
    pub fn cpu_multiplier(&self, cpu_millicores: u32, memory_mb: u32) -> f64 {
        let ratio = cpu_millicores as f64 / self.reference_millicores;
        let log_curve = 1.0 + self.cpu_sensitivity * ratio.log2();
        let mut mult = ratio.min(log_curve).clamp(0.25, 2.0);
        if (memory_mb as f64) < self.memory_floor_mb {
            mult *= 0.5;
        }
        mult
    }

    /// Per-replica service rate for an allocation (before GPU throttling).
    pub fn replica_rate(&self, config: &ResourceConfig) -> f64 {
        self.base_service_rate * self.cpu_multiplier(config.cpu_millicores, config.memory_mb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadKind {
    Poisson,
    Ramp,
    Burst,
}

fn default_burst_amplitude() -> f64 {
    1.0
}
fn default_burst_period() -> f64 {
    120.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadPattern {
    pub kind: WorkloadKind,
    /// Requests per second.
    pub base_rate: f64,
    /// Requests per second squared (ramp).
    #[serde(default)]
    pub ramp_slope: f64,
    #[serde(default = "default_burst_amplitude")]
    pub burst_amplitude: f64,
    #[serde(default = "default_burst_period")]
    pub burst_period_s: f64,
    /// Length of the high-rate part of each period; a quarter of the period when unset.
    #[serde(default)]
    pub burst_duration_s: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl WorkloadPattern {
    pub fn poisson(base_rate: f64, seed: u64) -> Self {
        Self {
            kind: WorkloadKind::Poisson,
            base_rate,
            ramp_slope: 0.0,
            burst_amplitude: 1.0,
            burst_period_s: default_burst_period(),
            burst_duration_s: None,
            seed,
        }
    }

    pub fn ramp(base_rate: f64, slope: f64, seed: u64) -> Self {
        Self { kind: WorkloadKind::Ramp, ramp_slope: slope, ..Self::poisson(base_rate, seed) }
    }

    pub fn burst(base_rate: f64, amplitude: f64, period_s: f64, seed: u64) -> Self {
        Self {
            kind: WorkloadKind::Burst,
            burst_amplitude: amplitude,
            burst_period_s: period_s,
            ..Self::poisson(base_rate, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_rate > 0.0) {
            return Err(SairError::Config("workload base_rate must be positive".into()));
        }
        if self.burst_amplitude < 1.0 {
            return Err(SairError::Config("burst_amplitude must be >= 1".into()));
        }
        if self.kind == WorkloadKind::Burst {
            if !(self.burst_period_s > 0.0) {
                return Err(SairError::Config("burst_period_s must be positive".into()));
            }
            let d = self.burst_duration();
            if !(d > 0.0 && d <= self.burst_period_s) {
                return Err(SairError::Config("burst_duration_s must be in (0, period]".into()));
            }
        }
        Ok(())
    }

    pub fn burst_duration(&self) -> f64 {
        self.burst_duration_s.unwrap_or(self.burst_period_s / 4.0)
    }
}

/// Simulator knobs that are not part of the pipeline description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    /// Delay before a scaled-up replica starts serving.
    pub startup_delay_s: f64,
    /// Tokens per refill window at full GPU rate.
    pub gpu_t_max: f64,
    /// Seed for service-time randomness (arrivals use the workload seed).
    pub service_seed: u64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { startup_delay_s: 15.0, gpu_t_max: crate::throttle::DEFAULT_T_MAX, service_seed: 0 }
    }
}
