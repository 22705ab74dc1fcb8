//! The decision loop.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, ControllerKind, CostMode, ScenarioConfig, Timing};
use super::oracle::{oracle_best_action, OracleInput};
use super::regret::RegretTerms;
use crate::action::{validate, ActionSource, CooldownState, RawDeltas, ScalingAction};
use crate::baselines::Baseline;
use crate::error::{Result, SairError};
use crate::experience::{Experience, ExperienceBuffer};
use crate::policy::{decide, DecisionContext, LlmPolicy, PolicyBackend};
use crate::reward::{compute_reward, Observation, ParetoFrontier, RewardBreakdown, RewardConfig};
use crate::sim::{sample_latency_percentile, PipelineState, ResourceConfig, SimSettings, Simulator, StageKind};

/// One decision round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub round: u64,
    pub time_s: f64,
    pub context: Vec<f64>,
    pub action: ScalingAction,
    pub source: ActionSource,
    pub probe_stage: Option<usize>,
    pub epsilon: f64,
    pub before: Observation<f64>,
    pub after: Observation<f64>,
    pub reward: RewardBreakdown<f64>,
    pub p99_ms: f64,
    pub mean_ms: f64,
    pub throughput_rps: f64,
    pub completions: u64,
    /// $ over the interval.
    pub cost_billable: f64,
    pub cost_effective: f64,
    pub replicas: Vec<u32>,
    pub rate_ratios: Vec<f64>,
    pub stored: bool,
    pub buffer_len: usize,
    /// Actions of the experiences placed in context.
    pub retrieved: Vec<ScalingAction>,
    pub oracle_action: Option<ScalingAction>,
    pub oracle_reward: Option<f64>,
    pub oracle_restricted: bool,
    #[serde(flatten)]
    pub regret: RegretTerms,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardTotals {
    pub r_latency: f64,
    pub r_cost: f64,
    pub r_sla: f64,
    pub r_proactive: f64,
    pub r_pareto: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub controller: String,
    pub seed: u64,
    pub rounds: u64,
    /// Over every request completed inside a measurement window.
    pub p99_ms: f64,
    pub mean_ms: f64,
    pub sla_violation_rate: f64,
    pub throughput_rps: f64,
    pub completions: u64,
    pub drops: u64,
    pub cost_billable: f64,
    pub cost_effective: f64,
    pub cost_per_1k_billable: f64,
    pub cost_per_1k_effective: f64,
    pub reward: RewardTotals,
    pub scaling_events: u64,
    pub probes: u64,
    pub fallbacks: u64,
    pub malformed_replies: u64,
    pub buffer_len: usize,
    pub mean_replicas: Vec<f64>,
    pub regret: Option<super::regret::RegretSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<EpisodeRecord>,
    pub summary: RunSummary,
    pub buffer: ExperienceBuffer,
    pub frontier: ParetoFrontier<f64>,
}

/// Builds the simulator for a scenario; the static baseline starts from one replica per
/// stage.
pub fn build_simulator(cfg: &ScenarioConfig) -> Result<Simulator> {
    let mut specs = cfg.stages.clone();
    if cfg.controller.kind == ControllerKind::Static {
        for s in &mut specs {
            s.initial.replicas = 1;
        }
    }
    let mut workload = cfg.workload.clone();
    workload.seed = derive_seed(cfg.seed, 1);
    let settings = SimSettings { service_seed: derive_seed(cfg.seed, 2), ..cfg.sim.clone() };
    Simulator::new(specs, workload, settings)
}

/// Applies a validated action to the simulator.
pub fn actuate(sim: &mut Simulator, action: &ScalingAction) -> Result<()> {
    let kinds: Vec<StageKind> = sim.specs().iter().map(|s| s.kind).collect();
    let before = sim.configs();
    let after = action.apply(&before, &kinds);
    for (i, (b, a)) in before.iter().zip(&after).enumerate() {
        if b != a {
            sim.apply_config(i, *a)?;
        }
    }
    Ok(())
}

/// Runs one decision interval after actuation: settle, then measure. Returns the window
/// snapshot and the latencies completed during the measurement part.
pub fn run_interval(sim: &mut Simulator, timing: &Timing) -> Result<(PipelineState, Vec<f64>)> {
    // keep clones cheap
    let _ = sim.drain_latencies();
    if timing.settle_s > 0.0 {
        sim.run_for(timing.settle_s, timing.dt_s)?;
    }
    sim.begin_window();
    sim.run_for(timing.interval_s - timing.settle_s, timing.dt_s)?;
    let lat = sim.window_latencies().to_vec();
    Ok((sim.snapshot(), lat))
}

/// Shared reward evaluation for executed and counterfactual actions.
#[derive(Debug, Clone)]
pub struct RewardContext {
    pub reward: RewardConfig<f64>,
    pub cost: super::cost::CostModel,
    pub cost_mode: CostMode,
    pub interval_s: f64,
    pub kinds: Vec<StageKind>,
}

impl RewardContext {
    pub fn from_scenario(cfg: &ScenarioConfig) -> Result<Self> {
        Ok(Self {
            reward: cfg.reward_config()?,
            cost: cfg.cost.clone(),
            cost_mode: cfg.reward.cost_mode,
            interval_s: cfg.timing.interval_s,
            kinds: cfg.stages.iter().map(|s| s.kind).collect(),
        })
    }

    pub fn observe(&self, p99_ms: f64, configs: &[ResourceConfig]) -> Observation<f64> {
        Observation { p99_ms, cost: self.cost.interval_cost(configs, &self.kinds, self.interval_s, self.cost_mode) }
    }

    pub fn score(
        &self,
        before: Observation<f64>,
        after: Observation<f64>,
        action: &ScalingAction,
        frontier: &ParetoFrontier<f64>,
    ) -> Result<RewardBreakdown<f64>> {
        compute_reward(before, after, &action.magnitude(), frontier, &self.reward)
    }

    pub fn new_frontier(&self) -> Result<ParetoFrontier<f64>> {
        ParetoFrontier::new(self.reward.l_baseline_ms, self.reward.c_budget)
    }
}

/// Runs a scenario with the backend its controller section describes.
pub fn run_experiment(cfg: &ScenarioConfig) -> Result<RunOutput> {
    run_with_backend(cfg, None)
}

/// Runs a scenario. `backend` replaces the policy backend of SAIR controllers.
pub fn run_with_backend(cfg: &ScenarioConfig, backend: Option<Box<dyn PolicyBackend>>) -> Result<RunOutput> {
    cfg.validate()?;
    let ctl = &cfg.controller;
    let rctx = RewardContext::from_scenario(cfg)?;
    let mut sim = build_simulator(cfg)?;
    let kinds = rctx.kinds.clone();
    let n_stages = kinds.len();

    let mut backend: Option<Box<dyn PolicyBackend>> = match (ctl.kind, backend) {
        (k, Some(b)) if k.is_sair() => Some(b),
        (ControllerKind::SairMock, None) => Some(Box::new(ctl.mock.clone())),
        (ControllerKind::SairLlm, None) => Some(Box::new(LlmPolicy::http(ctl.llm.clone().with_env()))),
        _ => None,
    };
    let mut baseline = match ctl.kind.baseline() {
        Some(k) => Some(Baseline::new(k, ctl.baseline.clone(), n_stages)?),
        None => None,
    };
    // baselines keep their own timers; the validator only enforces the grid for them
    let mut cooldowns = if baseline.is_some() {
        CooldownState::with_periods(n_stages, 0.0, 0.0)
    } else {
        CooldownState::with_periods(n_stages, ctl.cooldown_up_s, ctl.cooldown_down_s)
    };
    let mut schedule = ctl.exploration.clone();
    schedule.epsilon = schedule.epsilon0;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 3));
    let mut buffer = ExperienceBuffer::new(cfg.reward.r_min);
    let mut frontier = rctx.new_frontier()?;

    if cfg.timing.warmup_s > 0.0 {
        sim.run_for(cfg.timing.warmup_s, cfg.timing.dt_s)?;
    }
    sim.begin_window();
    sim.run_for(cfg.timing.interval_s - cfg.timing.settle_s, cfg.timing.dt_s)?;
    let mut state = sim.snapshot();

    let mut records = Vec::with_capacity(cfg.rounds as usize);
    let mut all_latencies = Vec::new();
    let drops_start = sim.drops();
    let completions_start = sim.completions();
    let mut fallbacks = 0;

    for round in 0..cfg.rounds {
        let now = sim.now();
        state.frontier = frontier.points().to_vec();
        let context = state.features();
        let configs = state.configs();
        let before = rctx.observe(state.p99_ms, &configs);

        let (retrieved, sims) = if ctl.kind.is_sair() && !buffer.is_empty() {
            let sel = buffer.select(&context, &ctl.selection)?;
            let all = buffer.similarities(&context, sel.sigma)?;
            let sims: Vec<f64> = sel.indices.iter().map(|&i| all[i]).collect();
            (sel.experiences, sims)
        } else {
            (Vec::new(), Vec::new())
        };
        let retrieved_actions: Vec<ScalingAction> = retrieved.iter().map(|e| e.action.clone()).collect();

        let epsilon = schedule.epsilon;
        let (raw, source, probe_stage) = if let Some(b) = backend.as_deref_mut() {
            let dctx = DecisionContext {
                state: &state,
                experiences: &retrieved,
                similarities: &sims,
                t_sla_ms: rctx.reward.t_sla_ms,
                round,
            };
            let d = decide(b, &dctx, &mut schedule, ctl.probe, &mut rng);
            (d.raw, d.source, d.probe_stage)
        } else {
            let b = baseline.as_mut().expect("baseline controller");
            (RawDeltas::from(&b.decide(&state, now)), ActionSource::Baseline, None)
        };
        if source == ActionSource::Fallback {
            fallbacks += 1;
        }
        let action = validate(&raw, &configs, &kinds, &cooldowns, now);
        debug_assert!(action.is_on_grid(&kinds));

        let retrieved_valid: Vec<ScalingAction> = retrieved_actions
            .iter()
            .map(|a| validate(&RawDeltas::from(a), &configs, &kinds, &cooldowns, now))
            .collect();
        let oracle = if cfg.oracle.enabled {
            Some(oracle_best_action(&OracleInput {
                sim: &sim,
                timing: &cfg.timing,
                rctx: &rctx,
                frontier: &frontier,
                before,
                cooldowns: &cooldowns,
                extra: std::iter::once(&action).chain(&retrieved_valid).cloned().collect(),
                budget: cfg.oracle.budget,
            })?)
        } else {
            None
        };

        actuate(&mut sim, &action)?;
        cooldowns.record(&action, now);
        let (next, lat) = run_interval(&mut sim, &cfg.timing)?;
        all_latencies.extend_from_slice(&lat);
        let new_configs = sim.configs();
        let after = rctx.observe(next.p99_ms, &new_configs);
        let reward = rctx.score(before, after, &action, &frontier)?;

        let stored = if ctl.kind.is_sair() {
            buffer.store(Experience {
                round,
                time_s: now,
                context,
                action: action.clone(),
                reward: reward.total,
                source,
            })?
        } else {
            false
        };
        frontier.update(after.p99_ms, after.cost);

        let regret = match &oracle {
            Some(o) => {
                let executed = o.reward_of(&action).ok_or_else(|| SairError::Config("oracle missed the executed action".into()))?;
                let best_retrieved = retrieved_valid
                    .iter()
                    .filter_map(|a| o.reward_of(a))
                    .chain(o.reward_of(&ScalingAction::noop(n_stages)))
                    .fold(f64::NEG_INFINITY, f64::max);
                RegretTerms::measure(o.best_reward, best_retrieved, executed, source == ActionSource::Probe)
            }
            None => RegretTerms::default(),
        };

        records.push(EpisodeRecord {
            round,
            time_s: now,
            context: state.features(),
            action,
            source,
            probe_stage,
            epsilon,
            before,
            after,
            reward,
            p99_ms: next.p99_ms,
            mean_ms: next.mean_ms,
            throughput_rps: next.throughput_rps,
            completions: next.samples as u64,
            cost_billable: rctx.cost.interval_cost(&new_configs, &kinds, cfg.timing.interval_s, CostMode::Billable),
            cost_effective: rctx.cost.interval_cost(&new_configs, &kinds, cfg.timing.interval_s, CostMode::Effective),
            replicas: new_configs.iter().map(|c| c.replicas).collect(),
            rate_ratios: new_configs.iter().map(|c| c.rate_ratio).collect(),
            stored,
            buffer_len: buffer.len(),
            retrieved: retrieved_actions,
            oracle_action: oracle.as_ref().map(|o| o.best.clone()),
            oracle_reward: oracle.as_ref().map(|o| o.best_reward),
            oracle_restricted: oracle.as_ref().is_some_and(|o| o.restricted),
            regret,
        });
        state = next;
    }

    let malformed = backend.as_ref().map_or(0, |b| b.malformed_replies());
    let mut summary = summarize(cfg, &records, &all_latencies, &rctx);
    summary.drops = sim.drops() - drops_start;
    summary.fallbacks = fallbacks;
    summary.malformed_replies = malformed;
    summary.buffer_len = buffer.len();
    summary.completions = sim.completions() - completions_start;
    if cfg.oracle.enabled {
        summary.regret = Some(super::regret::summarize(&records, rctx.reward.r_max));
    }
    Ok(RunOutput { records, summary, buffer, frontier })
}

pub fn summarize(cfg: &ScenarioConfig, records: &[EpisodeRecord], latencies: &[f64], rctx: &RewardContext) -> RunSummary {
    let rounds = records.len() as u64;
    let p99 = sample_latency_percentile(latencies, 99.0).unwrap_or(0.0);
    let mean = if latencies.is_empty() { 0.0 } else { latencies.iter().sum::<f64>() / latencies.len() as f64 };
    let window_s = cfg.timing.interval_s - cfg.timing.settle_s;
    let measured: u64 = records.iter().map(|r| r.completions).sum();
    let billable: f64 = records.iter().map(|r| r.cost_billable).sum();
    let effective: f64 = records.iter().map(|r| r.cost_effective).sum();
    // requests served over the run, estimated from the measured windows
    let served = measured as f64 * cfg.timing.interval_s / window_s;
    let per_1k = |c: f64| if served > 0.0 { 1000.0 * c / served } else { 0.0 };
    let mut reward = RewardTotals::default();
    for r in records {
        reward.r_latency += r.reward.r_latency;
        reward.r_cost += r.reward.r_cost;
        reward.r_sla += r.reward.r_sla;
        reward.r_proactive += r.reward.r_proactive;
        reward.r_pareto += r.reward.r_pareto;
        reward.total += r.reward.total;
    }
    let n_stages = rctx.kinds.len();
    let mean_replicas = (0..n_stages)
        .map(|i| {
            if records.is_empty() {
                0.0
            } else {
                records.iter().map(|r| r.replicas[i] as f64).sum::<f64>() / records.len() as f64
            }
        })
        .collect();
    RunSummary {
        scenario: cfg.name.clone(),
        controller: cfg.controller.kind.as_str().to_string(),
        seed: cfg.seed,
        rounds,
        p99_ms: p99,
        mean_ms: mean,
        sla_violation_rate: if rounds == 0 {
            0.0
        } else {
            records.iter().filter(|r| r.p99_ms > rctx.reward.t_sla_ms).count() as f64 / rounds as f64
        },
        throughput_rps: if rounds == 0 { 0.0 } else { measured as f64 / (window_s * rounds as f64) },
        completions: 0,
        drops: 0,
        cost_billable: billable,
        cost_effective: effective,
        cost_per_1k_billable: per_1k(billable),
        cost_per_1k_effective: per_1k(effective),
        reward,
        scaling_events: records.iter().filter(|r| !r.action.is_noop()).count() as u64,
        probes: records.iter().filter(|r| r.source == ActionSource::Probe).count() as u64,
        fallbacks: 0,
        malformed_replies: 0,
        buffer_len: 0,
        mean_replicas,
        regret: None,
    }
}
