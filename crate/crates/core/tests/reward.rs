use approx::assert_relative_eq;
use proptest::prelude::*;
use sair_core::reward::{compute_reward, sla_penalty, ActionMagnitude, Observation, ParetoFrontier, RewardConfig};

fn obs(p99_ms: f64, cost: f64) -> Observation<f64> {
    Observation { p99_ms, cost }
}

#[test]
fn worked_vector_with_dominated_outcome() {
    let cfg = RewardConfig { l_baseline_ms: 400.0, ..RewardConfig::with_sla(500.0, 10.0) };
    // after normalizes to (0.6, 0.12); (0.1, 0.12) dominates it at distance 0.5
    let mut f = ParetoFrontier::new(500.0, 10.0).unwrap();
    f.insert([0.1, 0.12]);
    let action = ActionMagnitude { replicas: 1.0, stages_scaled: 1, ..Default::default() };
    let r = compute_reward(obs(400.0, 1.0), obs(300.0, 1.2), &action, &f, &cfg).unwrap();
    assert_relative_eq!(r.r_latency, 0.175, max_relative = 1e-12);
    assert_relative_eq!(r.r_cost, -0.006, max_relative = 1e-12);
    assert_eq!(r.r_sla, 0.0);
    assert_eq!(r.r_proactive, 0.0);
    assert_relative_eq!(r.r_pareto, 0.8 / 1.5, max_relative = 1e-12);
    assert_relative_eq!(r.total, 0.175 - 0.006 + 0.8 / 1.5, max_relative = 1e-12);
    assert!(!r.clipped);
}

#[test]
fn frontier_is_read_not_written() {
    let cfg = RewardConfig::default();
    let f = ParetoFrontier::new(2000.0, 10.0).unwrap();
    let before = f.clone();
    compute_reward(obs(300.0, 2.0), obs(250.0, 2.0), &ActionMagnitude::default(), &f, &cfg).unwrap();
    assert_eq!(f, before);
}

#[test]
fn sla_penalty_only_strictly_above_target() {
    assert_eq!(sla_penalty(500.0, 500.0), 0.0);
    assert_relative_eq!(sla_penalty(1000.0, 500.0), -3.0);
}

fn magnitude() -> impl Strategy<Value = ActionMagnitude<f64>> {
    (0u32..4, 0u32..3, 0u32..3, 0u32..4, 0usize..4).prop_map(|(n, c, m, rho, s)| ActionMagnitude {
        replicas: n as f64,
        cpu_millicores: 500.0 * c as f64,
        memory_mb: 256.0 * m as f64,
        rate: 0.1 * rho as f64,
        stages_scaled: s,
    })
}

proptest! {
    #[test]
    fn total_is_clipped_component_sum(
        lb in 1.0f64..5000.0, la in 1.0f64..5000.0,
        cb in 0.0f64..20.0, ca in 0.0f64..20.0,
        a in magnitude(),
        pts in prop::collection::vec([0.0f64..=1.0, 0.0f64..=1.0], 0..6),
    ) {
        let cfg = RewardConfig::default();
        let mut f = ParetoFrontier::new(2000.0, 10.0).unwrap();
        for p in pts {
            f.insert(p);
        }
        let r = compute_reward(obs(lb, cb), obs(la, ca), &a, &f, &cfg).unwrap();
        let sum = r.component_sum();
        prop_assert!(r.total.abs() <= cfg.r_max);
        prop_assert_eq!(r.clipped, sum.abs() > cfg.r_max);
        if !r.clipped {
            prop_assert!((r.total - sum).abs() < 1e-12);
        }
        prop_assert!(r.r_sla <= 0.0);
        prop_assert!(r.r_proactive >= 0.0);
        prop_assert!((0.0..=2.0).contains(&r.r_pareto));
    }

    #[test]
    fn proactive_term_needs_pre_action_violation(l in 1.0f64..500.0, a in magnitude()) {
        let cfg = RewardConfig::default();
        let f = ParetoFrontier::new(2000.0, 10.0).unwrap();
        let r = compute_reward(obs(l, 1.0), obs(l, 1.0), &a, &f, &cfg).unwrap();
        prop_assert_eq!(r.r_proactive, 0.0);
    }
}
