use serde::{Deserialize, Serialize};

use super::{ScalingAction, StageDelta, CPU_GRID, MEMORY_GRID, RATE_GRID, RATE_STEP, REPLICA_GRID};
use crate::sim::{ResourceConfig, StageKind, N_MAX, N_MIN};

/// Unconstrained per-stage deltas, e.g. from converting an absolute proposal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RawStageDelta {
    pub replicas: f64,
    pub cpu_millicores: f64,
    pub memory_mb: f64,
    pub rate_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawDeltas {
    pub stages: Vec<RawStageDelta>,
}

impl From<&ScalingAction> for RawDeltas {
    fn from(a: &ScalingAction) -> Self {
        Self {
            stages: a
                .stages
                .iter()
                .map(|d| RawStageDelta {
                    replicas: d.replicas as f64,
                    cpu_millicores: d.cpu_millicores as f64,
                    memory_mb: d.memory_mb as f64,
                    rate_ratio: d.rate_delta(),
                })
                .collect(),
        }
    }
}

/// Nearest grid value to `raw`, where the grid is given in multiples of `unit`. Ties go
/// to the value of smaller magnitude; non-finite input maps to 0.
pub fn snap_to_grid(raw: f64, grid: &[i32], unit: f64) -> i32 {
    if !raw.is_finite() {
        return 0;
    }
    let mut best = 0i32;
    let mut best_dist = f64::INFINITY;
    for &g in grid {
        let dist = (raw - g as f64 * unit).abs();
        let tol = 1e-9 * unit.abs().max(1.0);
        if dist < best_dist - tol || ((dist - best_dist).abs() <= tol && g.abs() < best.abs()) {
            best = g;
            best_dist = dist;
        }
    }
    best
}

/// Time of the last replica scale-up and scale-down per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooldownState {
    pub last_up: Vec<Option<f64>>,
    pub last_down: Vec<Option<f64>>,
    pub up_cooldown_s: f64,
    pub down_cooldown_s: f64,
}

impl CooldownState {
    pub fn new(stages: usize) -> Self {
        Self::with_periods(stages, 60.0, 120.0)
    }

    pub fn with_periods(stages: usize, up_cooldown_s: f64, down_cooldown_s: f64) -> Self {
        Self { last_up: vec![None; stages], last_down: vec![None; stages], up_cooldown_s, down_cooldown_s }
    }

    pub fn up_blocked(&self, stage: usize, now: f64) -> bool {
        self.last_up.get(stage).copied().flatten().is_some_and(|t| now - t < self.up_cooldown_s)
    }

    pub fn down_blocked(&self, stage: usize, now: f64) -> bool {
        self.last_down.get(stage).copied().flatten().is_some_and(|t| now - t < self.down_cooldown_s)
    }

    /// Records the replica changes of an executed action.
    pub fn record(&mut self, action: &ScalingAction, now: f64) {
        for (i, d) in action.stages.iter().enumerate() {
            if d.replicas > 0 {
                if let Some(t) = self.last_up.get_mut(i) {
                    *t = Some(t.map_or(now, |p| p.max(now)));
                }
            } else if d.replicas < 0 {
                if let Some(t) = self.last_down.get_mut(i) {
                    *t = Some(t.map_or(now, |p| p.max(now)));
                }
            }
        }
    }
}

/// Maps raw deltas onto the action grid for the current allocation.
///
/// Each delta snaps to its nearest grid value. Replica deltas shrink so the replica
/// count stays within bounds; other deltas keep their grid value and the resulting
/// absolute is clamped when applied, becoming zero when the clamp would leave the
/// allocation unchanged. Replica changes blocked by a cooldown become zero. Missing
/// stages are treated as zero; extra stages are ignored.
pub fn validate(
    raw: &RawDeltas,
    configs: &[ResourceConfig],
    kinds: &[StageKind],
    cooldowns: &CooldownState,
    now: f64,
) -> ScalingAction {
    let stages = configs
        .iter()
        .zip(kinds)
        .enumerate()
        .map(|(i, (cfg, &kind))| {
            let r = raw.stages.get(i).copied().unwrap_or_default();
            let mut d = StageDelta { replicas: snap_to_grid(r.replicas, &REPLICA_GRID, 1.0), ..Default::default() };
            match kind {
                StageKind::Cpu => {
                    d.cpu_millicores = snap_to_grid(r.cpu_millicores, &CPU_GRID, 1.0);
                    d.memory_mb = snap_to_grid(r.memory_mb, &MEMORY_GRID, 1.0);
                }
                StageKind::Gpu => d.rate_steps = snap_to_grid(r.rate_ratio, &RATE_GRID, RATE_STEP),
            }

            let target = (cfg.replicas as i32 + d.replicas).clamp(N_MIN as i32, N_MAX as i32);
            d.replicas = target - cfg.replicas as i32;
            if (d.replicas > 0 && cooldowns.up_blocked(i, now)) || (d.replicas < 0 && cooldowns.down_blocked(i, now)) {
                d.replicas = 0;
            }

            let applied = d.apply(cfg, kind);
            if applied.cpu_millicores == cfg.cpu_millicores {
                d.cpu_millicores = 0;
            }
            if applied.memory_mb == cfg.memory_mb {
                d.memory_mb = 0;
            }
            if (applied.rate_ratio - cfg.rate_ratio).abs() < 1e-9 {
                d.rate_steps = 0;
            }
            d
        })
        .collect();
    ScalingAction { stages }
}
