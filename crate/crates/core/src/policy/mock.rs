//! Deterministic rule-based stand-in for the language-model policy.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{DecisionContext, PolicyBackend};
use crate::action::{AbsoluteProposal, ActionSource, ScalingAction, StageDelta, GAMMA_C, GAMMA_M};
use crate::error::Result;
use crate::sim::{ResourceConfig, StageKind, StageState, N_MIN};
use crate::throttle::RHO_MIN;

/// Scale up the busiest stage when it is saturated or P99 breaks the SLA; scale down the
/// least-utilized stage when everything is idle and latency is comfortable; otherwise
/// hold. Experiences only veto repeats of actions that lost reward in a near-identical
/// context.
///
/// The fields after `veto_similarity` are extensions that are off by default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockPolicy {
    pub scale_up_util: f64,
    pub scale_down_util: f64,
    /// Scale down only while P99 is below this fraction of the SLA target.
    pub scale_down_latency_frac: f64,
    pub veto_similarity: f64,
    /// Scale up once P99 exceeds this fraction of the SLA target.
    pub scale_up_latency_frac: f64,
    /// On a latency trigger, act on the stage with the highest stage P99 rather than the
    /// busiest one.
    pub latency_targets_slowest: bool,
    /// Add CPU instead of a replica to a processing-bound CPU stage on a latency
    /// trigger, and restore CPU below `min_cpu_millicores` or memory within one step of
    /// the floor whenever a stage is scaled up.
    pub vertical_steps: bool,
    pub min_cpu_millicores: u32,
    pub max_cpu_millicores: u32,
    /// Scale down only if the peak load over the last `history_rounds` rounds would
    /// keep utilization below this after the step.
    pub scale_down_headroom: Option<f64>,
    pub history_rounds: usize,
    /// When the rule holds, take the retrieved action with the best similarity-weighted
    /// mean reward if it beats the retrieved no-op outcomes by `reuse_margin`.
    pub reuse: bool,
    /// Experiences less similar than this are ignored for reuse.
    pub reuse_similarity: f64,
    pub reuse_margin: f64,
    #[serde(skip)]
    peaks: VecDeque<Vec<f64>>,
}

impl Default for MockPolicy {
    fn default() -> Self {
        Self {
            scale_up_util: 0.8,
            scale_down_util: 0.3,
            scale_down_latency_frac: 0.5,
            veto_similarity: 0.9,
            scale_up_latency_frac: 1.0,
            latency_targets_slowest: false,
            vertical_steps: false,
            min_cpu_millicores: 1000,
            max_cpu_millicores: 4000,
            scale_down_headroom: None,
            history_rounds: 10,
            reuse: false,
            reuse_similarity: 0.8,
            reuse_margin: 0.1,
            peaks: VecDeque::new(),
        }
    }
}

impl MockPolicy {
    /// The extensions used by the burst scenario.
    pub fn extended() -> Self {
        Self {
            scale_up_latency_frac: 0.5,
            latency_targets_slowest: true,
            vertical_steps: true,
            scale_down_headroom: Some(0.5),
            ..Self::default()
        }
    }

    /// Load in capacity units: utilization times replicas, times the rate ratio on GPU
    /// stages, so samples taken under different allocations compare.
    fn load(s: &StageState) -> f64 {
        let units = s.config.replicas as f64 * if s.kind == StageKind::Gpu { s.config.rate_ratio } else { 1.0 };
        s.utilization() * units
    }

    fn peak_load(&self, stage: usize, current: f64) -> f64 {
        self.peaks.iter().filter_map(|u| u.get(stage).copied()).fold(current, f64::max)
    }

    fn scale_up(&self, s: &StageState, saturated: bool) -> StageDelta {
        let processing_bound = s.queue_delay_ms < s.processing_ms;
        let mut delta = match s.kind {
            StageKind::Gpu if s.config.rate_ratio < 1.0 - 1e-9 => StageDelta::rate(1),
            StageKind::Cpu
                if self.vertical_steps
                    && !saturated
                    && processing_bound
                    && s.config.cpu_millicores + GAMMA_C as u32 <= self.max_cpu_millicores =>
            {
                StageDelta { cpu_millicores: GAMMA_C, ..StageDelta::default() }
            }
            _ => StageDelta::replicas(1),
        };
        if self.vertical_steps {
            if s.kind == StageKind::Cpu && s.config.cpu_millicores < self.min_cpu_millicores {
                delta.cpu_millicores = GAMMA_C;
            }
            if (s.config.memory_mb as f64) < s.memory_usage_mb + GAMMA_M as f64 {
                delta.memory_mb = GAMMA_M;
            }
        }
        delta
    }

    /// Whether `units` of capacity keep the stage's peak load under the headroom.
    fn fits(&self, i: usize, s: &StageState, units: f64) -> bool {
        let load = self.peak_load(i, Self::load(s));
        self.scale_down_headroom.is_none_or(|h| units > 0.0 && load / units < h)
    }

    fn scale_down(&self, i: usize, s: &StageState) -> Option<StageDelta> {
        let n = s.config.replicas as f64;
        let rho = if s.kind == StageKind::Gpu { s.config.rate_ratio } else { 1.0 };
        let fits = |units: f64| self.fits(i, s, units);
        if s.config.replicas > N_MIN && fits((n - 1.0) * rho) {
            Some(StageDelta::replicas(-1))
        } else if s.kind == StageKind::Gpu && rho > RHO_MIN + 1e-9 && fits(n * (rho - 0.1)) {
            Some(StageDelta::rate(-1))
        } else {
            None
        }
    }

    /// The rule's action before the experience veto.
    pub fn rule(&self, ctx: &DecisionContext) -> ScalingAction {
        let state = ctx.state;
        let n = state.stages.len();
        let Some(busiest) = state.most_utilized_stage() else { return ScalingAction::noop(n) };
        let saturated = state.stages[busiest].utilization() > self.scale_up_util;
        let slow = state.p99_ms > self.scale_up_latency_frac * ctx.t_sla_ms;
        if saturated || slow {
            let hot = if !saturated && self.latency_targets_slowest {
                (0..n).max_by(|&a, &b| state.stages[a].p99_ms.total_cmp(&state.stages[b].p99_ms)).unwrap_or(busiest)
            } else {
                busiest
            };
            return ScalingAction::single(n, hot, self.scale_up(&state.stages[hot], saturated));
        }
        let idle = state.stages.iter().all(|s| s.utilization() < self.scale_down_util);
        if idle && state.p99_ms < self.scale_down_latency_frac * ctx.t_sla_ms {
            // least-utilized stage that has something to give back
            let mut best: Option<(usize, f64, StageDelta)> = None;
            for (i, s) in state.stages.iter().enumerate() {
                let Some(delta) = self.scale_down(i, s) else { continue };
                if best.is_none_or(|(_, u, _)| s.utilization() < u) {
                    best = Some((i, s.utilization(), delta));
                }
            }
            if let Some((i, _, delta)) = best {
                return ScalingAction::single(n, i, delta);
            }
        }
        ScalingAction::noop(n)
    }

    /// Retrieved action to repeat instead of holding, if any.
    pub fn reused(&self, ctx: &DecisionContext) -> Option<ScalingAction> {
        let state = ctx.state;
        let n = state.stages.len();
        // (action, weighted reward sum, weight sum, earliest round)
        let mut groups: Vec<(&ScalingAction, f64, f64, u64)> = Vec::new();
        for (e, &sim) in ctx.experiences.iter().zip(ctx.similarities) {
            if sim < self.reuse_similarity || e.action.stages.len() != n {
                continue;
            }
            match groups.iter_mut().find(|g| g.0 == &e.action) {
                Some(g) => {
                    g.1 += sim * e.reward;
                    g.2 += sim;
                    g.3 = g.3.min(e.round);
                }
                None => groups.push((&e.action, sim * e.reward, sim, e.round)),
            }
        }
        let q = |g: &(&ScalingAction, f64, f64, u64)| g.1 / g.2;
        let baseline = match groups.iter().find(|g| g.0.is_noop()) {
            Some(g) => q(g),
            None => {
                let (num, den) = groups.iter().fold((0.0, 0.0), |acc, g| (acc.0 + g.1, acc.1 + g.2));
                if den > 0.0 { num / den } else { return None }
            }
        };
        let configs = state.configs();
        groups
            .iter()
            .filter(|g| !g.0.is_noop() && q(g) > baseline + self.reuse_margin)
            .filter(|g| self.safe_to_repeat(ctx, g.0, &configs))
            .max_by(|a, b| {
                q(a).total_cmp(&q(b))
                    .then(b.0.magnitude().mu(&Default::default()).total_cmp(&a.0.magnitude().mu(&Default::default())))
                    .then(b.3.cmp(&a.3))
            })
            .map(|g| g.0.clone())
    }

    /// Vertical cuts are never repeated, since their effect on capacity is not visible
    /// in the load estimate. Replicas and rate may only be given back under the SLA and
    /// within the headroom.
    fn safe_to_repeat(&self, ctx: &DecisionContext, action: &ScalingAction, configs: &[ResourceConfig]) -> bool {
        if action.stages.iter().any(|d| d.cpu_millicores < 0 || d.memory_mb < 0) {
            return false;
        }
        let shrinks = |d: &StageDelta| d.replicas < 0 || d.rate_steps < 0;
        if !action.stages.iter().any(shrinks) {
            return true;
        }
        if ctx.state.p99_ms >= ctx.t_sla_ms {
            return false;
        }
        let kinds = ctx.state.kinds();
        let after = action.apply(configs, &kinds);
        ctx.state.stages.iter().zip(&after).enumerate().all(|(i, (s, a))| {
            let rho = if s.kind == StageKind::Gpu { a.rate_ratio } else { 1.0 };
            !shrinks(&action.stages[i]) || self.fits(i, s, a.replicas as f64 * rho)
        })
    }

    /// Whether the nearest retrieved experience took the same action in a near-identical
    /// context and lost reward.
    pub fn vetoed(&self, ctx: &DecisionContext, action: &ScalingAction) -> bool {
        let nearest = ctx
            .experiences
            .iter()
            .zip(ctx.similarities)
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.round.cmp(&a.0.round)));
        nearest.is_some_and(|(e, &sim)| sim > self.veto_similarity && e.reward < 0.0 && &e.action == action)
    }
}

impl PolicyBackend for MockPolicy {
    fn source(&self) -> ActionSource {
        ActionSource::Mock
    }

    fn propose(&mut self, ctx: &DecisionContext) -> Result<AbsoluteProposal> {
        let mut action = self.rule(ctx);
        self.peaks.push_back(ctx.state.stages.iter().map(Self::load).collect());
        while self.peaks.len() > self.history_rounds {
            self.peaks.pop_front();
        }
        if !action.is_noop() && self.vetoed(ctx, &action) {
            log::debug!("mock policy: proposal vetoed by a similar negative experience");
            action = ScalingAction::noop(action.stages.len());
        } else if action.is_noop() && self.reuse {
            if let Some(reused) = self.reused(ctx) {
                action = reused;
            }
        }
        Ok(AbsoluteProposal::from_action(&action, &ctx.state.configs(), &ctx.state.kinds()))
    }
}
