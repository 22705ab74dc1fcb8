use serde::{Deserialize, Serialize};

use super::config::{ResourceConfig, StageKind};

/// Observed metrics of one stage over the current measurement window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageState {
    pub name: String,
    pub kind: StageKind,
    /// Target allocation, including replicas that are still starting.
    pub config: ResourceConfig,
    pub active_replicas: u32,
    pub queue_depth: usize,
    pub in_service: usize,
    pub cpu_util: f64,
    pub gpu_util_actual: f64,
    /// GPU utilization normalized to the rate quota.
    pub gpu_util_quota: f64,
    pub processing_ms: f64,
    pub queue_delay_ms: f64,
    /// Stage-attributed P99 (queueing plus processing).
    pub p99_ms: f64,
    /// CPU demanded per replica in millicores: offered load over capacity times the
    /// allocation, so it exceeds the allocation when the stage is overloaded.
    pub cpu_usage_millicores: f64,
    pub memory_usage_mb: f64,
}

impl StageState {
    /// Utilization used for bottleneck reasoning: CPU busy fraction for CPU stages,
    /// quota-normalized GPU utilization for GPU stages.
    pub fn utilization(&self) -> f64 {
        match self.kind {
            StageKind::Cpu => self.cpu_util,
            StageKind::Gpu => self.gpu_util_quota,
        }
    }
}

/// Pipeline context observed at a decision point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineState {
    pub time_s: f64,
    pub stages: Vec<StageState>,
    pub p99_ms: f64,
    pub mean_ms: f64,
    pub throughput_rps: f64,
    pub arrivals: u64,
    pub completions: u64,
    pub drops: u64,
    pub in_flight: u64,
    /// Number of completed requests in the window.
    pub samples: usize,
    /// Normalized (latency, cost) points of the Pareto frontier at observation time.
    #[serde(default)]
    pub frontier: Vec<[f64; 2]>,
}

/// Number of features per stage in [`PipelineState::features`].
pub const STAGE_FEATURES: usize = 7;

impl PipelineState {
    /// Context feature vector: per stage `[n, c, m, rho, q, u_cpu, u_gpu]`, then
    /// `[p99_ms, throughput]`.
    pub fn features(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.stages.len() * STAGE_FEATURES + 2);
        for s in &self.stages {
            out.extend_from_slice(&[
                s.config.replicas as f64,
                s.config.cpu_millicores as f64,
                s.config.memory_mb as f64,
                s.config.rate_ratio,
                s.queue_depth as f64,
                s.cpu_util,
                s.gpu_util_quota,
            ]);
        }
        out.push(self.p99_ms);
        out.push(self.throughput_rps);
        out
    }

    pub fn configs(&self) -> Vec<ResourceConfig> {
        self.stages.iter().map(|s| s.config).collect()
    }

    pub fn kinds(&self) -> Vec<StageKind> {
        self.stages.iter().map(|s| s.kind).collect()
    }

    pub fn stage_names(&self) -> Vec<String> {
        self.stages.iter().map(|s| s.name.clone()).collect()
    }

    /// Index of the stage with the highest utilization (first on ties).
    pub fn most_utilized_stage(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in self.stages.iter().enumerate() {
            let u = s.utilization();
            if best.is_none_or(|(_, b)| u > b) {
                best = Some((i, u));
            }
        }
        best.map(|(i, _)| i)
    }
}
