use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::action::{stage_grid, ScalingAction, StageDelta};
use crate::sim::StageKind;

/// Distribution of random single-stage probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    /// Any nonzero grid delta of the chosen stage.
    #[default]
    Uniform,
    /// A scale-up by one replica (bottleneck identification).
    ScaleUp,
}

/// Picks a stage uniformly and returns a single-stage probe on it.
pub fn random_probe<R: Rng + ?Sized>(kinds: &[StageKind], probe: ProbeKind, rng: &mut R) -> (usize, ScalingAction) {
    let stage = rng.random_range(0..kinds.len());
    let delta = match probe {
        ProbeKind::ScaleUp => StageDelta::replicas(1),
        ProbeKind::Uniform => {
            let grid: Vec<StageDelta> = stage_grid(kinds[stage]).into_iter().filter(|d| !d.is_zero()).collect();
            *grid.choose(rng).expect("grid has nonzero deltas")
        }
    };
    (stage, ScalingAction::single(kinds.len(), stage, delta))
}
