//! Re-scoring a persisted episode log under a different reward configuration.

use serde::{Deserialize, Serialize};

use super::runner::{EpisodeRecord, RewardTotals};
use crate::error::Result;
use crate::reward::{compute_reward, ParetoFrontier, RewardBreakdown, RewardConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayResult {
    pub rewards: Vec<RewardBreakdown<f64>>,
    pub totals: RewardTotals,
    /// Rounds whose recomputed total differs from the logged one by more than 1e-9.
    pub changed: usize,
}

/// Recomputes every round's reward from the logged observations and actions, rebuilding
/// the frontier in round order.
pub fn replay(records: &[EpisodeRecord], cfg: &RewardConfig<f64>) -> Result<ReplayResult> {
    let mut frontier = ParetoFrontier::new(cfg.l_baseline_ms, cfg.c_budget)?;
    let mut rewards = Vec::with_capacity(records.len());
    let mut totals = RewardTotals::default();
    let mut changed = 0;
    for r in records {
        let b = compute_reward(r.before, r.after, &r.action.magnitude(), &frontier, cfg)?;
        frontier.update(r.after.p99_ms, r.after.cost);
        totals.r_latency += b.r_latency;
        totals.r_cost += b.r_cost;
        totals.r_sla += b.r_sla;
        totals.r_proactive += b.r_proactive;
        totals.r_pareto += b.r_pareto;
        totals.total += b.total;
        if (b.total - r.reward.total).abs() > 1e-9 {
            changed += 1;
        }
        rewards.push(b);
    }
    Ok(ReplayResult { rewards, totals, changed })
}
