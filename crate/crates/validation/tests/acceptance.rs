//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any
//! criterion fails.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sair_core::error::{Result as CoreResult, SairError};
use sair_core::experience::{
    gaussian_kl, greedy_select, information_gain, loo_means, median_pairwise_distance, objective, posterior,
    similarity, surprisal, GaussianPrior, SelectionConfig,
};
use sair_core::harness::{
    bottleneck_suite, evaluate_bottleneck_detection, mean_summary, run_experiment, run_sweep, run_with_backend,
    tuned_summary, ControllerKind, RunOutput, ScenarioConfig,
};
use sair_core::policy::{ChatMessage, ChatTransport, LlmConfig, LlmPolicy};
use sair_core::reward::{compute_reward, ActionMagnitude, Observation, ParetoFrontier, RewardConfig};
use sair_core::sim::{ResourceConfig, SimSettings, Simulator, StageKind, StageSpec, WorkloadPattern};
use sair_core::TokenBucket;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn scenario(file: &str) -> ScenarioConfig {
    let path = format!("{}/../../scenarios/{file}", env!("CARGO_MANIFEST_DIR"));
    ScenarioConfig::load(std::path::Path::new(&path)).expect("scenario loads")
}

fn dominated_by(p: [f64; 2], q: [f64; 2]) -> bool {
    q[0] <= p[0] && q[1] <= p[1] && (q[0] < p[0] || q[1] < p[1])
}

/// Union area of the boxes `[x, 1] x [y, 1]`, summed cell by cell over the grid spanned
/// by all coordinates.
fn union_area(points: &[[f64; 2]]) -> f64 {
    let mut xs: Vec<f64> = points.iter().map(|p| p[0]).chain([1.0]).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p[1]).chain([1.0]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let mut area = 0.0;
    for wx in xs.windows(2) {
        for wy in ys.windows(2) {
            if points.iter().any(|p| p[0] <= wx[0] && p[1] <= wy[0]) {
                area += (wx[1] - wx[0]) * (wy[1] - wy[0]);
            }
        }
    }
    area
}

fn random_point(rng: &mut ChaCha8Rng) -> [f64; 2] {
    // coarse coordinates half the time so that ties and duplicates show up
    if rng.random_bool(0.5) {
        [rng.random_range(0..=10) as f64 / 10.0, rng.random_range(0..=10) as f64 / 10.0]
    } else {
        [rng.random::<f64>(), rng.random::<f64>()]
    }
}

fn random_frontier(rng: &mut ChaCha8Rng, max: usize) -> (ParetoFrontier<f64>, Vec<[f64; 2]>) {
    let mut f = ParetoFrontier::new(1.0, 1.0).unwrap();
    let pts: Vec<[f64; 2]> = (0..rng.random_range(1..=max)).map(|_| random_point(rng)).collect();
    for p in &pts {
        f.insert(*p);
    }
    (f, pts)
}

fn pareto_separation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut min_gap = f64::INFINITY;
    let mut violations = 0;
    let mut pairs = 0;
    while pairs < 10_000 {
        let (f, _) = random_frontier(&mut rng, 8);
        let anchor = f.points()[rng.random_range(0..f.len())];
        if anchor == [1.0, 1.0] {
            // nothing inside the unit square is dominated by the reference corner
            continue;
        }
        let better = loop {
            let p = if rng.random_bool(0.5) {
                random_point(&mut rng)
            } else {
                [anchor[0] * rng.random::<f64>(), anchor[1] * rng.random::<f64>()]
            };
            if !f.points().iter().any(|&q| dominated_by(p, q)) {
                break p;
            }
        };
        let worse = loop {
            let p = [
                anchor[0] + (1.0 - anchor[0]) * rng.random::<f64>(),
                anchor[1] + (1.0 - anchor[1]) * rng.random::<f64>(),
            ];
            if dominated_by(p, anchor) {
                break p;
            }
        };
        let gap = f.pareto_reward(better) - f.pareto_reward(worse);
        pairs += 1;
        if gap < 0.2 {
            violations += 1;
        }
        min_gap = min_gap.min(gap);
    }
    let took = start.elapsed();
    outcome(
        violations == 0 && took < Duration::from_secs(10),
        format!("min gap {min_gap:.4} over 10^4 pairs, {violations} violations, {took:.2?}"),
    )
}

struct Golden {
    label: &'static str,
    before: (f64, f64),
    after: (f64, f64),
    action: ActionMagnitude<f64>,
    frontier: &'static [[f64; 2]],
    // r_latency, r_cost, r_sla, r_proactive, r_pareto, total
    expect: [f64; 6],
}

fn reward_golden_vectors() -> Outcome {
    // SLA 500 ms, budget $10: l_baseline 2000, frontier normalizers (2000 ms, $10)
    let noop = ActionMagnitude::default();
    let one_up = ActionMagnitude { replicas: 1.0, stages_scaled: 1, ..noop };
    let multi = ActionMagnitude { replicas: 1.0, cpu_millicores: 500.0, memory_mb: 256.0, rate: 0.2, stages_scaled: 3 };
    let cases = [
        Golden {
            label: "no-op within SLA, empty frontier",
            before: (300.0, 2.0),
            after: (280.0, 2.0),
            action: noop,
            frontier: &[],
            expect: [0.007, 0.0, 0.0, 0.0, 1.688, 1.695],
        },
        Golden {
            label: "SLA violation, one replica up, new frontier point",
            before: (800.0, 2.0),
            after: (650.0, 2.5),
            action: one_up,
            frontier: &[[0.2, 0.3], [0.5, 0.1]],
            expect: [0.0525, -0.015, -0.69, 0.27, 1.00875, 0.62625],
        },
        Golden {
            label: "multi-stage action, dominated outcome",
            before: (1200.0, 3.0),
            after: (900.0, 4.0),
            action: multi,
            frontier: &[[0.3, 0.3]],
            expect: [0.105, -0.03, -2.24, 1.512, 0.8 / (1.0 + 0.0325f64.sqrt()), 0.024806665613891887],
        },
        Golden {
            label: "deep violation clipped at -R_max",
            before: (3000.0, 1.0),
            after: (2500.0, 1.0),
            action: noop,
            frontier: &[],
            expect: [0.175, 0.0, -24.0, 0.0, 1.0, -5.0],
        },
        Golden {
            label: "scale-down saving cost",
            before: (200.0, 5.0),
            after: (260.0, 3.0),
            action: one_up,
            frontier: &[[0.1, 0.5]],
            expect: [-0.021, 0.06, 0.0, 0.0, 1.174, 1.213],
        },
        Golden {
            label: "proactive multi-stage rescue clipped at +R_max",
            before: (2000.0, 2.0),
            after: (400.0, 3.0),
            action: multi,
            frontier: &[],
            expect: [0.56, -0.03, 0.0, 3.24, 1.56, 5.0],
        },
    ];
    let cfg = RewardConfig::with_sla(500.0, 10.0);
    let mut worst = 0.0f64;
    let mut failed = Vec::new();
    for c in &cases {
        let mut f = ParetoFrontier::new(2000.0, 10.0).unwrap();
        for p in c.frontier {
            f.insert(*p);
        }
        let obs = |(l, k): (f64, f64)| Observation { p99_ms: l, cost: k };
        let r = compute_reward(obs(c.before), obs(c.after), &c.action, &f, &cfg).unwrap();
        let got = [r.r_latency, r.r_cost, r.r_sla, r.r_proactive, r.r_pareto, r.total];
        for (g, e) in got.iter().zip(c.expect) {
            let err = if e == 0.0 { g.abs() } else { ((g - e) / e).abs() };
            worst = worst.max(err);
            if err > 1e-9 {
                failed.push(format!("{}: got {g}, want {e}", c.label));
            }
        }
    }
    outcome(
        failed.is_empty(),
        format!("{} vectors, worst relative error {worst:.1e}{}", cases.len(), failed.join("; ")),
    )
}

fn frontier_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut set_mismatch = 0;
    let mut worst_hv = 0.0f64;
    let mut status_mismatch = 0;
    for _ in 0..500 {
        let (f, pts) = random_frontier(&mut rng, 6);
        let mut expected: Vec<[f64; 2]> = Vec::new();
        for (i, &p) in pts.iter().enumerate() {
            let beaten = pts.iter().enumerate().any(|(j, &q)| j != i && dominated_by(p, q));
            if !beaten && !expected.contains(&p) {
                expected.push(p);
            }
        }
        let mut got = f.points().to_vec();
        got.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        expected.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        if got != expected {
            set_mismatch += 1;
        }

        let q = random_point(&mut rng);
        let dominated = expected.iter().any(|&e| dominated_by(q, e));
        match f.hypervolume_contribution(q) {
            Ok(h) if !dominated => {
                let mut with = expected.clone();
                with.push(q);
                worst_hv = worst_hv.max((h - (union_area(&with) - union_area(&expected))).abs());
            }
            Err(SairError::Dominated) if dominated => {}
            _ => status_mismatch += 1,
        }
    }
    outcome(
        set_mismatch == 0 && status_mismatch == 0 && worst_hv <= 1e-12,
        format!(
            "500 instances: {set_mismatch} frontier mismatches, {status_mismatch} dominance mismatches, max |dHV| {worst_hv:.1e}"
        ),
    )
}

fn token_bucket_proportionality() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;

    // bucket alone: single-block launches until one blocks, every window
    let windows = 2_000u64;
    for rho in [0.1, 0.3, 0.5, 0.9] {
        let mut b = TokenBucket::new(1000.0, rho).unwrap();
        for _ in 0..windows {
            while b.blocked_len() == 0 {
                b.try_launch(1.0).unwrap();
            }
            b.refill();
        }
        let ratio = b.admitted_total() / (1000.0 * (windows + 1) as f64);
        let err = (ratio / rho - 1.0).abs();
        pass &= err <= 0.02;
        notes.push(format!("bucket rho={rho}: {ratio:.4} ({:.2}%)", err * 100.0));
    }

    // simulator: one GPU stage under demand far above its capacity
    let served = |rho: f64| {
        let spec = StageSpec::gpu("g", 100.0)
            .with_initial(ResourceConfig { rate_ratio: rho, ..ResourceConfig::default() });
        let mut sim = Simulator::new(
            vec![spec],
            WorkloadPattern::poisson(400.0, 3),
            SimSettings { service_seed: 4, ..SimSettings::default() },
        )
        .unwrap();
        sim.run_for(300.0, 1.0).unwrap();
        sim.stage_totals(0).served as f64
    };
    let full = served(1.0);
    for rho in [0.1, 0.3, 0.5, 0.9] {
        let ratio = served(rho) / full;
        let err = (ratio / rho - 1.0).abs();
        pass &= err <= 0.02;
        notes.push(format!("sim rho={rho}: {ratio:.4} ({:.2}%)", err * 100.0));
    }
    let took = start.elapsed();
    pass &= took < Duration::from_secs(30);
    outcome(pass, format!("{}, {took:.2?}", notes.join(", ")))
}

fn mm1_calibration() -> Outcome {
    let (lambda, mu) = (10.0, 20.0);
    let expected = lambda / (mu * (mu - lambda));
    let mut sim = Simulator::new(
        vec![StageSpec::cpu("s", mu)],
        WorkloadPattern::poisson(lambda, 17),
        SimSettings { service_seed: 18, ..SimSettings::default() },
    )
    .unwrap();
    sim.run_for(12_000.0, 10.0).unwrap();
    let t = sim.stage_totals(0);
    let err = (t.mean_queue_delay_s / expected - 1.0).abs();
    outcome(
        t.served >= 100_000 && err <= 0.05,
        format!(
            "{} requests, mean wait {:.5}s vs {expected:.5}s ({:.2}%)",
            t.served,
            t.mean_queue_delay_s,
            err * 100.0
        ),
    )
}

fn bottleneck_detection() -> Outcome {
    let suite = bottleneck_suite(200, 7);
    let reports = evaluate_bottleneck_detection(&suite, &[4, 16, 64], 0.2).unwrap();
    let acc: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let monotone = acc.windows(2).all(|w| w[1] >= w[0] - 0.03);
    let best = acc.last().copied().unwrap_or(0.0);
    outcome(
        best >= 0.6 && monotone,
        format!("accuracy at m=4/16/64: {acc:.3?}"),
    )
}

fn oracle_run(file: &str) -> RunOutput {
    let mut cfg = scenario(file);
    cfg.controller.kind = ControllerKind::SairMock;
    cfg.oracle.enabled = true;
    run_experiment(&cfg).unwrap()
}

fn regret_accounting() -> Outcome {
    let mut notes = Vec::new();
    let mut bound_ok = true;
    let mut quartile_ok = false;
    for file in ["steady.toml", "burst.toml", "stationary.toml"] {
        let out = oracle_run(file);
        let r = out.summary.regret.expect("oracle on");
        bound_ok &= r.bound_holds();
        notes.push(format!("{file}: regret {:.1} <= bound {:.1}: {}", r.cumulative_regret, r.bound, r.bound_holds()));
        if file == "stationary.toml" {
            let q = &r.quartile_regret;
            let ratio = q[3] / q[0];
            quartile_ok = ratio < 0.5;
            notes.push(format!("{} rounds, quartile regret {q:.3?}, last/first {ratio:.3} (need < 0.5)", out.records.len()));
        }
    }
    outcome(bound_ok && quartile_ok, notes.join("; "))
}

struct Instance {
    scores: Vec<f64>,
    sim: Vec<Vec<f64>>,
}

fn selection_instance(rng: &mut ChaCha8Rng, n: usize) -> Instance {
    let dim = 6;
    let contexts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..3.0)).collect();
    let query: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    let sigma = median_pairwise_distance(&contexts).unwrap();
    let base = loo_means(&rewards);
    let scores = (0..n)
        .map(|i| surprisal(similarity(&query, &contexts[i], sigma).unwrap(), rewards[i], base[i]))
        .collect();
    let sim = contexts
        .iter()
        .map(|a| contexts.iter().map(|b| similarity(a, b, sigma).unwrap()).collect())
        .collect();
    Instance { scores, sim }
}

fn selection_quality() -> Outcome {
    let lambda = SelectionConfig::<f64>::default().lambda_div;
    let mut rng = ChaCha8Rng::seed_from_u64(31);

    let (n, m) = (40, 8);
    let mut wins = 0;
    for _ in 0..200 {
        let inst = selection_instance(&mut rng, n);
        let keys: Vec<u64> = (0..n as u64).collect();
        let greedy = objective(&greedy_select(&inst.scores, &inst.sim, m, lambda, &keys), &inst.scores, &inst.sim, lambda);
        let random_mean = (0..100)
            .map(|_| objective(&sample(&mut rng, n, m).into_vec(), &inst.scores, &inst.sim, lambda))
            .sum::<f64>()
            / 100.0;
        if greedy >= random_mean {
            wins += 1;
        }
    }

    let mut worst_ratio = f64::INFINITY;
    for _ in 0..200 {
        let inst = selection_instance(&mut rng, 8);
        let keys: Vec<u64> = (0..8).collect();
        let greedy = objective(&greedy_select(&inst.scores, &inst.sim, 3, lambda, &keys), &inst.scores, &inst.sim, lambda);
        let mut best = f64::NEG_INFINITY;
        for a in 0..8 {
            for b in a + 1..8 {
                for c in b + 1..8 {
                    best = best.max(objective(&[a, b, c], &inst.scores, &inst.sim, lambda));
                }
            }
        }
        let ratio = if best > 0.0 { greedy / best } else if greedy >= best { 1.0 } else { 0.0 };
        worst_ratio = worst_ratio.min(ratio);
    }
    outcome(
        wins >= 190 && worst_ratio >= 0.5,
        format!("greedy >= random mean on {wins}/200 buffers; worst greedy/optimum over C(8,3) {worst_ratio:.3}"),
    )
}

fn baseline_ordering() -> Outcome {
    let seeds = [1, 2, 3, 4, 5];
    let base = scenario("burst.toml");
    let with = |kind| {
        let mut c = base.clone();
        c.controller.kind = kind;
        c
    };
    let sair: Vec<_> =
        run_sweep(&[with(ControllerKind::SairMock)], &seeds).unwrap().into_iter().map(|o| o.summary).collect();
    let sair = mean_summary(&sair).unwrap();
    let (_, threshold) = tuned_summary(&with(ControllerKind::Threshold), &seeds).unwrap();
    let (_, hpa) = tuned_summary(&with(ControllerKind::HpaCpu), &seeds).unwrap();
    outcome(
        sair.p99_ms <= threshold.p99_ms && sair.cost_effective <= hpa.cost_effective,
        format!(
            "P99 sair {:.1} ms vs tuned threshold {:.1} ms; effective cost sair ${:.3} vs tuned hpa ${:.3}",
            sair.p99_ms, threshold.p99_ms, sair.cost_effective, hpa.cost_effective
        ),
    )
}

/// Replies with random, malformed or extreme proposals, and sometimes fails outright.
struct FuzzTransport {
    rng: Mutex<ChaCha8Rng>,
    names: Vec<String>,
}

impl FuzzTransport {
    fn value(rng: &mut ChaCha8Rng) -> String {
        match rng.random_range(0..8) {
            0 => rng.random_range(-1_000_000i64..1_000_000).to_string(),
            1 => format!("{}", rng.random::<f64>() * 1e12 - 5e11),
            2 => "\"lots\"".into(),
            3 => "null".into(),
            4 => "[1, 2]".into(),
            5 => format!("\"{}\"", rng.random_range(0..20)),
            6 => "1e400".into(),
            _ => rng.random_range(0..10).to_string(),
        }
    }

    fn reply(&self) -> CoreResult<String> {
        let mut rng = self.rng.lock().unwrap();
        let text = match rng.random_range(0..10) {
            0 => return Err(SairError::Policy("connection reset".into())),
            1 => "I think we should scale up the GPU.".into(),
            2 => "{\"preprocess\": {\"replicas\": ".into(),
            3 => "```json\n[1, 2, 3]\n```".into(),
            4 => format!("{{\"ghost\": {{\"replicas\": {}}}}}", Self::value(&mut rng)),
            _ => {
                let mut fields = Vec::new();
                for name in &self.names {
                    if rng.random_bool(0.3) {
                        continue;
                    }
                    let mut kv = Vec::new();
                    for key in ["replicas", "cpu_millicores", "memory_mb", "rate_ratio", "action"] {
                        if rng.random_bool(0.6) {
                            let v = if key == "action" { "\"none\"".to_string() } else { Self::value(&mut rng) };
                            if key != "action" || rng.random_bool(0.2) {
                                kv.push(format!("\"{key}\": {v}"));
                            }
                        }
                    }
                    fields.push(format!("\"{name}\": {{{}}}", kv.join(", ")));
                }
                format!("Here you go: {{{}}} done", fields.join(", "))
            }
        };
        Ok(text)
    }
}

impl ChatTransport for FuzzTransport {
    fn complete(&self, _messages: &[ChatMessage]) -> CoreResult<String> {
        self.reply()
    }
}

fn safety_fuzz() -> Outcome {
    let mut cfg = scenario("steady.toml");
    cfg.controller.kind = ControllerKind::SairLlm;
    cfg.rounds = 1000;
    let names: Vec<String> = cfg.stages.iter().map(|s| s.name.clone()).collect();
    let kinds: Vec<StageKind> = cfg.stages.iter().map(|s| s.kind).collect();
    let transport = FuzzTransport { rng: Mutex::new(ChaCha8Rng::seed_from_u64(99)), names };
    let policy = LlmPolicy::new(Box::new(transport), LlmConfig::default());
    let out = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run_with_backend(&cfg, Some(Box::new(policy))))) {
        Ok(Ok(out)) => out,
        Ok(Err(e)) => return outcome(false, format!("loop returned an error: {e}")),
        Err(_) => return outcome(false, "loop panicked"),
    };
    let off_grid = out.records.iter().filter(|r| !r.action.is_on_grid(&kinds)).count();
    let out_of_range = out.records.iter().filter(|r| r.replicas.iter().any(|n| !(1..=8).contains(n))).count();
    outcome(
        out.records.len() == 1000 && off_grid == 0 && out_of_range == 0,
        format!(
            "{} rounds, {off_grid} off-grid actions, {out_of_range} rounds with replicas outside [1, 8]",
            out.records.len()
        ),
    )
}

fn kl_monotonicity() -> Outcome {
    let prior = GaussianPrior { mean: 0.5, var: 2.0 };
    let noise = 0.8;
    let others = [0.2, 1.1, 0.7, 1.9];
    let (m0, _) = posterior(prior, noise, &others);
    let mut last = f64::NEG_INFINITY;
    let mut increasing = true;
    for k in 0..50 {
        let residual = 0.1 * k as f64;
        // alternate sides of the posterior mean: only the squared residual should matter
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let kl = information_gain(prior, noise, &others, m0 + sign * residual);
        increasing &= kl > last;
        last = kl;
    }
    let (m1, v1) = posterior(prior, noise, &[0.0]);
    let self_kl = gaussian_kl(m1, v1, m1, v1);
    outcome(increasing && self_kl.abs() < 1e-15, format!("50 residuals in [0, 4.9], final KL {last:.4}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("pareto separation", pareto_separation),
        ("reward golden vectors", reward_golden_vectors),
        ("frontier and hypervolume oracle", frontier_oracle),
        ("token bucket proportionality", token_bucket_proportionality),
        ("M/M/1 calibration", mm1_calibration),
        ("bottleneck detection", bottleneck_detection),
        ("regret accounting", regret_accounting),
        ("selection quality", selection_quality),
        ("burst baseline ordering", baseline_ordering),
        ("policy safety fuzz", safety_fuzz),
        ("surprisal KL monotonicity", kl_monotonicity),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if only.is_some_and(|n| n != i + 1) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {} [{:.1?}]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
