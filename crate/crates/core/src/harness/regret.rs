//! Per-round regret terms and the cumulative bound check.

use serde::{Deserialize, Serialize};

use super::runner::EpisodeRecord;
use crate::action::ActionSource;

/// Measured regret decomposition for one round. All fields are `None` when the oracle
/// is off.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegretTerms {
    /// Oracle reward minus executed reward.
    pub regret: Option<f64>,
    /// Coverage gap: oracle reward minus the best reward among retrieved actions and
    /// the no-op.
    pub xi: Option<f64>,
    /// Selection error: best retrieved reward minus executed reward. Not attributed on
    /// probe rounds.
    pub eta: Option<f64>,
}

impl RegretTerms {
    pub fn measure(best: f64, best_retrieved: f64, executed: f64, probe: bool) -> Self {
        Self {
            regret: Some((best - executed).max(0.0)),
            xi: Some((best - best_retrieved).max(0.0)),
            eta: if probe { None } else { Some((best_retrieved - executed).max(0.0)) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RegretSummary {
    pub cumulative_regret: f64,
    /// `sum (1-eps)(xi+eta) + (sum eps + delta*T) * R_max` over the whole run.
    pub bound: f64,
    pub sum_epsilon: f64,
    /// Fraction of rounds where the policy backend failed and a no-op was executed.
    pub delta_hat: f64,
    pub mean_xi: f64,
    pub mean_eta: f64,
    /// First round whose prefix regret exceeds the prefix bound.
    pub first_violation: Option<u64>,
    /// Mean per-round regret in each quarter of the run.
    pub quartile_regret: Vec<f64>,
    pub restricted_rounds: u64,
}

impl RegretSummary {
    pub fn bound_holds(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Prefix-wise regret and bound, one entry per round.
pub fn prefix_series(records: &[EpisodeRecord], r_max: f64) -> Vec<(f64, f64)> {
    let mut regret = 0.0;
    let mut weighted = 0.0;
    let mut eps = 0.0;
    let mut failures = 0.0;
    records
        .iter()
        .map(|r| {
            regret += r.regret.regret.unwrap_or(0.0);
            weighted += (1.0 - r.epsilon) * (r.regret.xi.unwrap_or(0.0) + r.regret.eta.unwrap_or(0.0));
            eps += r.epsilon;
            if r.source == ActionSource::Fallback {
                failures += 1.0;
            }
            (regret, weighted + (eps + failures) * r_max)
        })
        .collect()
}

pub fn summarize(records: &[EpisodeRecord], r_max: f64) -> RegretSummary {
    let series = prefix_series(records, r_max);
    let n = records.len();
    let mean = |f: &dyn Fn(&EpisodeRecord) -> Option<f64>| {
        let v: Vec<f64> = records.iter().filter_map(f).collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let quartile_regret = (0..4)
        .map(|q| {
            let (a, b) = (q * n / 4, (q + 1) * n / 4);
            let part = &records[a..b];
            if part.is_empty() {
                0.0
            } else {
                part.iter().map(|r| r.regret.regret.unwrap_or(0.0)).sum::<f64>() / part.len() as f64
            }
        })
        .collect();
    let (cumulative_regret, bound) = series.last().copied().unwrap_or((0.0, 0.0));
    RegretSummary {
        cumulative_regret,
        bound,
        sum_epsilon: records.iter().map(|r| r.epsilon).sum(),
        delta_hat: if n == 0 {
            0.0
        } else {
            records.iter().filter(|r| r.source == ActionSource::Fallback).count() as f64 / n as f64
        },
        mean_xi: mean(&|r| r.regret.xi),
        mean_eta: mean(&|r| r.regret.eta),
        first_violation: series
            .iter()
            .zip(records)
            .find(|((reg, bound), _)| *reg > *bound + 1e-9)
            .map(|(_, r)| r.round),
        quartile_regret,
        restricted_rounds: records.iter().filter(|r| r.oracle_restricted).count() as u64,
    }
}
