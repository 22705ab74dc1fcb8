//! Brute-force best action by counterfactual rollouts from cloned simulator state.

use rayon::prelude::*;

use super::config::Timing;
use super::runner::{actuate, run_interval, RewardContext};
use crate::action::{validate, CooldownState, RawDeltas, ScalingAction};
use crate::error::Result;
use crate::reward::{Observation, ParetoFrontier};
use crate::sim::Simulator;

pub struct OracleInput<'a> {
    pub sim: &'a Simulator,
    pub timing: &'a Timing,
    pub rctx: &'a RewardContext,
    /// Frontier as it stands before the round.
    pub frontier: &'a ParetoFrontier<f64>,
    pub before: Observation<f64>,
    pub cooldowns: &'a CooldownState,
    /// Validated actions that must be scored in addition to the grid.
    pub extra: Vec<ScalingAction>,
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best: ScalingAction,
    pub best_reward: f64,
    pub candidates: Vec<(ScalingAction, f64)>,
    /// Set when the grid exceeded the budget and only replica and rate actions were tried.
    pub restricted: bool,
}

impl OracleResult {
    pub fn reward_of(&self, action: &ScalingAction) -> Option<f64> {
        self.candidates.iter().find(|(a, _)| a == action).map(|(_, r)| *r)
    }
}

/// Feasible single-stage candidates in the current state, no-op first, deduplicated
/// after validation.
pub fn candidate_actions(input: &OracleInput) -> (Vec<ScalingAction>, bool) {
    let configs = input.sim.configs();
    let kinds = &input.rctx.kinds;
    let now = input.sim.now();
    let mut out: Vec<ScalingAction> = Vec::new();
    for a in ScalingAction::enumerate_single_stage(kinds) {
        let v = validate(&RawDeltas::from(&a), &configs, kinds, input.cooldowns, now);
        if !out.contains(&v) {
            out.push(v);
        }
    }
    let mut restricted = false;
    if out.len() > input.budget {
        restricted = true;
        out.retain(|a| a.stages.iter().all(|d| d.cpu_millicores == 0 && d.memory_mb == 0));
        out.truncate(input.budget.max(1));
    }
    for a in &input.extra {
        if !out.contains(a) {
            out.push(a.clone());
        }
    }
    (out, restricted)
}

/// Scores every candidate over one interval with common random numbers: each rollout
/// starts from an identical clone, random streams included.
pub fn oracle_best_action(input: &OracleInput) -> Result<OracleResult> {
    let (candidates, restricted) = candidate_actions(input);
    let rewards: Vec<f64> = candidates
        .par_iter()
        .map(|a| -> Result<f64> {
            let mut sim = input.sim.clone();
            actuate(&mut sim, a)?;
            let (state, _) = run_interval(&mut sim, input.timing)?;
            let after = input.rctx.observe(state.p99_ms, &sim.configs());
            Ok(input.rctx.score(input.before, after, a, input.frontier)?.total)
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, r) in rewards.iter().enumerate() {
        if *r > rewards[best] {
            best = i;
        }
    }
    Ok(OracleResult {
        best: candidates[best].clone(),
        best_reward: rewards[best],
        candidates: candidates.into_iter().zip(rewards).collect(),
        restricted,
    })
}
