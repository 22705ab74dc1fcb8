//! Experiment runner: scenarios, cost accounting, oracle regret, bottleneck evaluation
//! and export.

pub mod bottleneck;
mod config;
mod cost;
pub mod export;
mod oracle;
pub mod plots;
mod regret;
mod replay;
mod runner;

pub use bottleneck::{
    bottleneck_suite, classify, evaluate_bottleneck_detection, BottleneckClass, BottleneckReport, ConfusionMatrix,
    LabeledScenario,
};
pub use config::{
    ControllerKind, ControllerSection, CostMode, OracleConfig, RewardSection, ScenarioConfig, Timing,
};
pub use cost::CostModel;
pub use oracle::{candidate_actions, oracle_best_action, OracleInput, OracleResult};
pub use regret::{prefix_series, RegretSummary, RegretTerms};
pub use replay::{replay, ReplayResult};
pub use runner::{
    actuate, build_simulator, run_experiment, run_interval, run_with_backend, EpisodeRecord, RewardContext,
    RewardTotals, RunOutput, RunSummary,
};

use rayon::prelude::*;

use crate::baselines::sweep_configs;
use crate::error::Result;

/// Runs every scenario under every seed. Runs are independent and execute in parallel;
/// results follow the input order, scenarios outer and seeds inner.
pub fn run_sweep(scenarios: &[ScenarioConfig], seeds: &[u64]) -> Result<Vec<RunOutput>> {
    for s in scenarios {
        s.validate()?;
    }
    let jobs: Vec<ScenarioConfig> =
        scenarios.iter().flat_map(|s| seeds.iter().map(move |&seed| s.with_seed(seed))).collect();
    jobs.par_iter().map(run_experiment).collect()
}

/// One scenario per setting of the controller's baseline sweep (a single entry for
/// controllers without one).
pub fn baseline_variants(cfg: &ScenarioConfig) -> Vec<ScenarioConfig> {
    match cfg.controller.kind.baseline() {
        Some(kind) => sweep_configs(kind, &cfg.controller.baseline)
            .into_iter()
            .map(|b| {
                let mut c = cfg.clone();
                c.controller.baseline = b;
                c
            })
            .collect(),
        None => vec![cfg.clone()],
    }
}

/// Index of the tuned setting: cheapest run that meets the SLA, else the lowest P99.
pub fn tuned_index(summaries: &[RunSummary], t_sla_ms: f64) -> Option<usize> {
    let meeting = summaries
        .iter()
        .enumerate()
        .filter(|(_, s)| s.p99_ms <= t_sla_ms)
        .min_by(|a, b| a.1.cost_effective.total_cmp(&b.1.cost_effective));
    meeting
        .or_else(|| summaries.iter().enumerate().min_by(|a, b| a.1.p99_ms.total_cmp(&b.1.p99_ms)))
        .map(|(i, _)| i)
}

/// Seed average of several runs of one setting. Latency, cost and total reward are
/// averaged; the remaining fields come from the first run.
pub fn mean_summary(runs: &[RunSummary]) -> Option<RunSummary> {
    let first = runs.first()?;
    let n = runs.len() as f64;
    let avg = |f: fn(&RunSummary) -> f64| runs.iter().map(f).sum::<f64>() / n;
    let mut s = first.clone();
    s.p99_ms = avg(|r| r.p99_ms);
    s.mean_ms = avg(|r| r.mean_ms);
    s.cost_effective = avg(|r| r.cost_effective);
    s.cost_billable = avg(|r| r.cost_billable);
    s.cost_per_1k_effective = avg(|r| r.cost_per_1k_effective);
    s.cost_per_1k_billable = avg(|r| r.cost_per_1k_billable);
    s.reward.total = avg(|r| r.reward.total);
    Some(s)
}

/// Runs every baseline variant under every seed and returns the tuned variant's index
/// with its seed-averaged summary.
pub fn tuned_summary(cfg: &ScenarioConfig, seeds: &[u64]) -> Result<(usize, RunSummary)> {
    let variants = baseline_variants(cfg);
    let outs = run_sweep(&variants, seeds)?;
    let per_variant: Vec<RunSummary> = outs
        .chunks(seeds.len().max(1))
        .map(|c| mean_summary(&c.iter().map(|o| o.summary.clone()).collect::<Vec<_>>()))
        .collect::<Option<_>>()
        .ok_or_else(|| crate::error::SairError::Config("no seeds".into()))?;
    let best = tuned_index(&per_variant, cfg.reward.t_sla_ms)
        .ok_or_else(|| crate::error::SairError::Config("no variants".into()))?;
    Ok((best, per_variant[best].clone()))
}
