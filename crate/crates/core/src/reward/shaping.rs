//! Five-component shaped reward.

use serde::{Deserialize, Serialize};

use super::frontier::ParetoFrontier;
use crate::error::{Result, SairError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig<T: Scalar = f64> {
    pub w_latency: T,
    pub w_cost: T,
    pub w_proactive: T,
    pub t_sla_ms: T,
    pub l_baseline_ms: T,
    /// Cost budget per decision interval ($).
    pub c_budget: T,
    pub r_max: T,
    pub gamma_c: T,
    pub gamma_m: T,
    /// Weight of resource and stage-count terms in the action magnitude.
    pub alpha: T,
}

impl<T: Scalar> Default for RewardConfig<T> {
    fn default() -> Self {
        Self::with_sla(T::lit(500.0), T::lit(10.0))
    }
}

impl<T: Scalar> RewardConfig<T> {
    /// Defaults for an SLA target; the latency baseline is four times the target.
    pub fn with_sla(t_sla_ms: T, c_budget: T) -> Self {
        Self {
            w_latency: T::lit(0.7),
            w_cost: T::lit(0.3),
            w_proactive: T::lit(0.3),
            t_sla_ms,
            l_baseline_ms: T::lit(4.0) * t_sla_ms,
            c_budget,
            r_max: T::lit(5.0),
            gamma_c: T::lit(500.0),
            gamma_m: T::lit(256.0),
            alpha: T::lit(0.5),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.t_sla_ms, self.l_baseline_ms, self.c_budget, self.r_max, self.gamma_c, self.gamma_m];
        if positive.iter().any(|v| !(*v > T::zero())) {
            return Err(SairError::Config(
                "SLA target, normalizers, R_max and step sizes must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Absolute sizes of an action, summed over stages.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionMagnitude<T: Scalar = f64> {
    pub replicas: T,
    pub cpu_millicores: T,
    pub memory_mb: T,
    pub rate: T,
    /// Stages with any nonzero delta.
    pub stages_scaled: usize,
}

impl<T: Scalar> ActionMagnitude<T> {
    pub fn is_noop(&self) -> bool {
        self.stages_scaled == 0
    }

    /// `sum|dn| + alpha * (sum(|dc|/gamma_c + |dm|/gamma_m + |drho|) + stages_scaled)`.
    pub fn mu(&self, cfg: &RewardConfig<T>) -> T {
        self.replicas
            + cfg.alpha * (self.cpu_millicores / cfg.gamma_c + self.memory_mb / cfg.gamma_m + self.rate)
            + cfg.alpha * T::from_usize(self.stages_scaled).expect("small count")
    }
}

/// Latency and cost of one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation<T: Scalar = f64> {
    pub p99_ms: T,
    /// Cost per decision interval ($).
    pub cost: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown<T: Scalar = f64> {
    pub r_latency: T,
    pub r_cost: T,
    pub r_sla: T,
    pub r_proactive: T,
    pub r_pareto: T,
    pub total: T,
    pub clipped: bool,
}

impl<T: Scalar> RewardBreakdown<T> {
    pub fn component_sum(&self) -> T {
        self.r_latency + self.r_cost + self.r_sla + self.r_proactive + self.r_pareto
    }
}

/// `-(L/T)^2 + 1` strictly above the SLA target, else 0.
pub fn sla_penalty<T: Scalar>(latency_ms: T, t_sla_ms: T) -> T {
    if latency_ms > t_sla_ms {
        T::one() - (latency_ms / t_sla_ms).powi(2)
    } else {
        T::zero()
    }
}

/// Shaped reward for moving from `before` to `after` with an action of size `action`.
///
/// The frontier is read as it stood before this round; the caller updates it afterwards.
/// Urgency for the proactive term is taken from the pre-action latency.
pub fn compute_reward<T: Scalar>(
    before: Observation<T>,
    after: Observation<T>,
    action: &ActionMagnitude<T>,
    frontier: &ParetoFrontier<T>,
    cfg: &RewardConfig<T>,
) -> Result<RewardBreakdown<T>> {
    cfg.validate()?;
    let r_latency = cfg.w_latency * (before.p99_ms - after.p99_ms) / cfg.l_baseline_ms;
    let r_cost = -cfg.w_cost * (after.cost - before.cost) / cfg.c_budget;
    let r_sla = sla_penalty(after.p99_ms, cfg.t_sla_ms);
    let urgency = (before.p99_ms / cfg.t_sla_ms - T::one()).max(T::zero());
    let r_proactive = urgency * action.mu(cfg) * cfg.w_proactive;
    let (point, _) = frontier.normalize(after.p99_ms, after.cost);
    let r_pareto = frontier.pareto_reward(point);

    let sum = r_latency + r_cost + r_sla + r_proactive + r_pareto;
    let total = sum.max(-cfg.r_max).min(cfg.r_max);
    Ok(RewardBreakdown { r_latency, r_cost, r_sla, r_proactive, r_pareto, total, clipped: total != sum })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sla_penalty_cases() {
        assert_eq!(sla_penalty(1000.0, 500.0), -3.0);
        assert_eq!(sla_penalty(500.0, 500.0), 0.0);
        assert!(sla_penalty(500.0f64 + 1e-9, 500.0).abs() < 1e-9);
    }

    #[test]
    fn mu_counts_all_dimensions() {
        let cfg = RewardConfig::<f64>::default();
        let m = ActionMagnitude { replicas: 2.0, cpu_millicores: 500.0, memory_mb: 256.0, rate: 0.2, stages_scaled: 2 };
        assert_relative_eq!(m.mu(&cfg), 2.0 + 0.5 * (1.0 + 1.0 + 0.2) + 0.5 * 2.0);
        assert_eq!(ActionMagnitude::<f64>::default().mu(&cfg), 0.0);
    }

    #[test]
    fn clip_flagged() {
        let cfg = RewardConfig::<f64>::with_sla(100.0, 10.0);
        let f = ParetoFrontier::new(400.0, 10.0).unwrap();
        let before = Observation { p99_ms: 100.0, cost: 1.0 };
        let after = Observation { p99_ms: 400.0, cost: 1.0 };
        let r = compute_reward(before, after, &ActionMagnitude::default(), &f, &cfg).unwrap();
        assert!(r.clipped);
        assert_eq!(r.total, -5.0);
    }

    #[test]
    fn bad_config_rejected() {
        let mut cfg = RewardConfig::<f64>::default();
        cfg.t_sla_ms = 0.0;
        let f = ParetoFrontier::new(1.0, 1.0).unwrap();
        let o = Observation { p99_ms: 1.0, cost: 1.0 };
        assert!(compute_reward(o, o, &ActionMagnitude::default(), &f, &cfg).is_err());
    }
}
