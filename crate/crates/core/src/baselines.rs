//! Reference autoscalers: static allocation, CPU-utilization HPA, latency thresholds and
//! a vertical right-sizer.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::action::{snap_to_grid, ScalingAction, StageDelta, CPU_GRID, MEMORY_GRID, REPLICA_GRID};
use crate::error::{Result, SairError};
use crate::sim::{PipelineState, StageKind, CPU_MIN_MILLICORES, MEMORY_MIN_MB, N_MAX, N_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Static,
    HpaCpu,
    Threshold,
    Vpa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub hpa_target_util: f64,
    pub hpa_stabilization_s: f64,
    /// Relative deviation from the target that HPA ignores.
    pub hpa_tolerance: f64,
    pub threshold_cpu_ms: f64,
    pub threshold_gpu_ms: f64,
    pub threshold_cooldown_s: f64,
    pub vpa_headroom: f64,
    /// Trailing decision intervals used for the peak.
    pub vpa_window: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            hpa_target_util: 0.70,
            hpa_stabilization_s: 60.0,
            hpa_tolerance: 0.1,
            threshold_cpu_ms: 100.0,
            threshold_gpu_ms: 200.0,
            threshold_cooldown_s: 60.0,
            vpa_headroom: 1.15,
            vpa_window: 5,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.hpa_target_util > 0.0 && self.hpa_target_util < 1.0) {
            return Err(SairError::Config("hpa_target_util must be in (0, 1)".into()));
        }
        if !(self.threshold_cpu_ms > 0.0 && self.threshold_gpu_ms > 0.0) {
            return Err(SairError::Config("latency thresholds must be positive".into()));
        }
        if self.vpa_window == 0 || !(self.vpa_headroom > 0.0) {
            return Err(SairError::Config("vpa window and headroom must be positive".into()));
        }
        if self.hpa_stabilization_s < 0.0 || self.threshold_cooldown_s < 0.0 || self.hpa_tolerance < 0.0 {
            return Err(SairError::Config("baseline timers must be non-negative".into()));
        }
        Ok(())
    }
}

/// A baseline controller with its private timers.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    pub kind: BaselineKind,
    pub cfg: BaselineConfig,
    last_change: Vec<Option<f64>>,
    cpu_peaks: Vec<VecDeque<f64>>,
    mem_peaks: Vec<VecDeque<f64>>,
}

impl Baseline {
    pub fn new(kind: BaselineKind, cfg: BaselineConfig, stages: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            kind,
            cfg,
            last_change: vec![None; stages],
            cpu_peaks: vec![VecDeque::new(); stages],
            mem_peaks: vec![VecDeque::new(); stages],
        })
    }

    pub fn decide(&mut self, state: &PipelineState, now: f64) -> ScalingAction {
        let action = match self.kind {
            BaselineKind::Static => ScalingAction::noop(state.stages.len()),
            BaselineKind::HpaCpu => self.hpa(state, now),
            BaselineKind::Threshold => self.threshold(state, now),
            BaselineKind::Vpa => self.vpa(state),
        };
        for (i, d) in action.stages.iter().enumerate() {
            if !d.is_zero() {
                self.last_change[i] = Some(now);
            }
        }
        action
    }

    fn within(&self, stage: usize, now: f64, window: f64) -> bool {
        self.last_change[stage].is_some_and(|t| now - t < window)
    }

    /// Per CPU stage: `desired = ceil(n * u / target)`, ignored within the tolerance band
    /// and the stabilization window.
    fn hpa(&self, state: &PipelineState, now: f64) -> ScalingAction {
        let stages = state
            .stages
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if s.kind != StageKind::Cpu || self.within(i, now, self.cfg.hpa_stabilization_s) {
                    return StageDelta::default();
                }
                let ratio = s.cpu_util / self.cfg.hpa_target_util;
                if (ratio - 1.0).abs() <= self.cfg.hpa_tolerance {
                    return StageDelta::default();
                }
                let n = s.config.replicas as f64;
                let desired = (n * ratio - 1e-9).ceil().clamp(N_MIN as f64, N_MAX as f64);
                replica_step(desired - n, s.config.replicas)
            })
            .collect();
        ScalingAction { stages }
    }

    fn threshold(&self, state: &PipelineState, now: f64) -> ScalingAction {
        let stages = state
            .stages
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if self.within(i, now, self.cfg.threshold_cooldown_s) {
                    return StageDelta::default();
                }
                let limit = match s.kind {
                    StageKind::Cpu => self.cfg.threshold_cpu_ms,
                    StageKind::Gpu => self.cfg.threshold_gpu_ms,
                };
                if s.p99_ms > limit {
                    replica_step(1.0, s.config.replicas)
                } else if s.p99_ms < 0.5 * limit {
                    replica_step(-1.0, s.config.replicas)
                } else {
                    StageDelta::default()
                }
            })
            .collect();
        ScalingAction { stages }
    }

    /// Moves CPU and memory toward `headroom * peak usage` over the trailing window.
    fn vpa(&mut self, state: &PipelineState) -> ScalingAction {
        let window = self.cfg.vpa_window;
        let stages = state
            .stages
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if s.kind != StageKind::Cpu {
                    return StageDelta::default();
                }
                push_window(&mut self.cpu_peaks[i], s.cpu_usage_millicores, window);
                push_window(&mut self.mem_peaks[i], s.memory_usage_mb, window);
                let peak_cpu = self.cpu_peaks[i].iter().copied().fold(0.0, f64::max);
                let peak_mem = self.mem_peaks[i].iter().copied().fold(0.0, f64::max);
                let rec_cpu = (self.cfg.vpa_headroom * peak_cpu).max(CPU_MIN_MILLICORES as f64);
                let rec_mem = (self.cfg.vpa_headroom * peak_mem).max(MEMORY_MIN_MB as f64);
                let mut dc = snap_to_grid(rec_cpu - s.config.cpu_millicores as f64, &CPU_GRID, 1.0);
                let mut dm = snap_to_grid(rec_mem - s.config.memory_mb as f64, &MEMORY_GRID, 1.0);
                if (s.config.cpu_millicores as i64 + dc as i64) < CPU_MIN_MILLICORES as i64 {
                    dc = 0;
                }
                if (s.config.memory_mb as i64 + dm as i64) < MEMORY_MIN_MB as i64 {
                    dm = 0;
                }
                StageDelta { cpu_millicores: dc, memory_mb: dm, ..Default::default() }
            })
            .collect();
        ScalingAction { stages }
    }
}

fn push_window(w: &mut VecDeque<f64>, v: f64, cap: usize) {
    w.push_back(v);
    while w.len() > cap {
        w.pop_front();
    }
}

/// Replica delta snapped to the grid and kept within bounds.
fn replica_step(raw: f64, current: u32) -> StageDelta {
    let d = snap_to_grid(raw, &REPLICA_GRID, 1.0);
    let target = (current as i32 + d).clamp(N_MIN as i32, N_MAX as i32);
    StageDelta::replicas(target - current as i32)
}

/// Baseline parameter sweeps; the best setting per scenario is reported.
pub fn sweep_configs(kind: BaselineKind, base: &BaselineConfig) -> Vec<BaselineConfig> {
    match kind {
        BaselineKind::HpaCpu => {
            [0.5, 0.6, 0.7, 0.8].iter().map(|&t| BaselineConfig { hpa_target_util: t, ..base.clone() }).collect()
        }
        BaselineKind::Threshold => [50.0, 100.0, 200.0, 500.0]
            .iter()
            .map(|&ms| BaselineConfig { threshold_cpu_ms: ms, threshold_gpu_ms: 2.0 * ms, ..base.clone() })
            .collect(),
        _ => vec![base.clone()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{ResourceConfig, StageState};

    fn stage(kind: StageKind, n: u32, util: f64, p99: f64) -> StageState {
        StageState {
            name: "s".into(),
            kind,
            config: ResourceConfig { replicas: n, ..Default::default() },
            active_replicas: n,
            queue_depth: 0,
            in_service: 0,
            cpu_util: if kind == StageKind::Cpu { util } else { 0.0 },
            gpu_util_actual: 0.0,
            gpu_util_quota: if kind == StageKind::Gpu { util } else { 0.0 },
            processing_ms: 10.0,
            queue_delay_ms: 0.0,
            p99_ms: p99,
            cpu_usage_millicores: util * 1000.0,
            memory_usage_mb: 256.0,
        }
    }

    fn state(stages: Vec<StageState>) -> PipelineState {
        PipelineState {
            time_s: 0.0,
            stages,
            p99_ms: 100.0,
            mean_ms: 50.0,
            throughput_rps: 10.0,
            arrivals: 0,
            completions: 0,
            drops: 0,
            in_flight: 0,
            samples: 0,
            frontier: Vec::new(),
        }
    }

    #[test]
    fn hpa_formula_and_stabilization() {
        let mut b = Baseline::new(BaselineKind::HpaCpu, BaselineConfig::default(), 1).unwrap();
        assert!(b.decide(&state(vec![stage(StageKind::Cpu, 2, 0.70, 50.0)]), 0.0).is_noop());
        let hot = state(vec![stage(StageKind::Cpu, 2, 0.95, 50.0)]);
        assert_eq!(b.decide(&hot, 0.0).stages[0].replicas, 1);
        assert!(b.decide(&hot, 30.0).is_noop());
        assert_eq!(b.decide(&hot, 60.0).stages[0].replicas, 1);
        // GPU stages are left alone
        let mut g = Baseline::new(BaselineKind::HpaCpu, BaselineConfig::default(), 1).unwrap();
        assert!(g.decide(&state(vec![stage(StageKind::Gpu, 1, 1.0, 900.0)]), 0.0).is_noop());
    }

    #[test]
    fn threshold_rules() {
        let mut b = Baseline::new(BaselineKind::Threshold, BaselineConfig::default(), 2).unwrap();
        let s = state(vec![stage(StageKind::Cpu, 2, 0.5, 150.0), stage(StageKind::Gpu, 2, 0.5, 150.0)]);
        let a = b.decide(&s, 0.0);
        assert_eq!((a.stages[0].replicas, a.stages[1].replicas), (1, 0));
        assert!(b.decide(&s, 30.0).stages[0].is_zero());
        let low = state(vec![stage(StageKind::Cpu, 2, 0.1, 40.0), stage(StageKind::Gpu, 1, 0.1, 40.0)]);
        let a = b.decide(&low, 100.0);
        assert_eq!((a.stages[0].replicas, a.stages[1].replicas), (-1, 0));
    }

    #[test]
    fn vpa_recommendations_snap() {
        let mut b = Baseline::new(BaselineKind::Vpa, BaselineConfig::default(), 1).unwrap();
        let mut s = state(vec![stage(StageKind::Cpu, 1, 0.8, 50.0)]);
        s.stages[0].config.memory_mb = 256;
        let a = b.decide(&s, 0.0);
        assert_eq!(a.stages[0].cpu_millicores, 0);
        let mut b = Baseline::new(BaselineKind::Vpa, BaselineConfig::default(), 1).unwrap();
        s.stages[0].cpu_usage_millicores = 1200.0;
        assert_eq!(b.decide(&s, 0.0).stages[0].cpu_millicores, 500);
        assert_eq!(b.decide(&s, 30.0).stages[0].replicas, 0);
    }

    #[test]
    fn vpa_converges_under_stable_usage() {
        let mut b = Baseline::new(BaselineKind::Vpa, BaselineConfig::default(), 1).unwrap();
        let mut cfg = ResourceConfig { cpu_millicores: 3000, memory_mb: 2048, ..Default::default() };
        let mut last = ScalingAction::noop(1);
        for round in 0..20 {
            let mut st = stage(StageKind::Cpu, 1, 0.5, 50.0);
            st.config = cfg;
            st.cpu_usage_millicores = 700.0;
            last = b.decide(&state(vec![st]), round as f64 * 30.0);
            cfg = last.apply(&[cfg], &[StageKind::Cpu])[0];
        }
        assert!(last.is_noop());
        assert!((cfg.cpu_millicores as f64 - 1.15 * 700.0).abs() <= 250.0);
        assert!((cfg.memory_mb as f64 - 1.15 * 256.0).abs() <= 128.0);
    }

    #[test]
    fn static_and_sweeps() {
        let mut b = Baseline::new(BaselineKind::Static, BaselineConfig::default(), 1).unwrap();
        assert!(b.decide(&state(vec![stage(StageKind::Cpu, 1, 1.0, 900.0)]), 0.0).is_noop());
        assert_eq!(sweep_configs(BaselineKind::HpaCpu, &BaselineConfig::default()).len(), 4);
        assert_eq!(sweep_configs(BaselineKind::Threshold, &BaselineConfig::default())[3].threshold_gpu_ms, 1000.0);
        assert!(Baseline::new(BaselineKind::HpaCpu, BaselineConfig { hpa_target_util: 1.2, ..Default::default() }, 1).is_err());
    }
}
