use sair_core::harness::{export, run_experiment, ControllerKind, ScenarioConfig};
use sair_core::sim::{sample_latency_percentile, ResourceConfig, SimSettings, Simulator, StageSpec, WorkloadPattern};

fn pipeline(seed: u64) -> Simulator {
    Simulator::new(
        vec![StageSpec::cpu("pre", 20.0), StageSpec::gpu("infer", 60.0), StageSpec::cpu("post", 45.0)],
        WorkloadPattern::poisson(18.0, seed),
        SimSettings { service_seed: seed + 100, ..SimSettings::default() },
    )
    .unwrap()
}

fn p99_after(mut sim: Simulator, stage: Option<usize>) -> f64 {
    if let Some(i) = stage {
        let mut c = sim.configs()[i];
        c.replicas += 1;
        sim.apply_config(i, c).unwrap();
    }
    // past the startup delay before measuring
    sim.run_for(30.0, 0.1).unwrap();
    sim.begin_window();
    sim.run_for(600.0, 0.1).unwrap();
    sample_latency_percentile(sim.window_latencies(), 99.0).unwrap()
}

#[test]
fn scaling_busiest_stage_cuts_p99_most() {
    for seed in 1..=3 {
        let mut sim = pipeline(seed);
        sim.run_for(120.0, 0.1).unwrap();
        sim.begin_window();
        sim.run_for(30.0, 0.1).unwrap();
        let busiest = sim.snapshot().most_utilized_stage().unwrap();
        assert_eq!(busiest, 0);

        let base = p99_after(sim.clone(), None);
        let drops: Vec<f64> = (0..3).map(|i| base - p99_after(sim.clone(), Some(i))).collect();
        let best = drops.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(best, busiest, "seed {seed}: p99 drops {drops:?}");
    }
}

#[test]
fn more_replicas_never_lengthen_queueing() {
    let mut last = f64::INFINITY;
    for n in 1..=4 {
        let spec = StageSpec::cpu("s", 12.0).with_initial(ResourceConfig { replicas: n, ..ResourceConfig::default() });
        let mut sim = Simulator::new(vec![spec], WorkloadPattern::poisson(10.0, 9), SimSettings::default()).unwrap();
        sim.run_for(3000.0, 1.0).unwrap();
        let wait = sim.stage_totals(0).mean_queue_delay_s;
        assert!(wait <= last, "n={n}: {wait} > {last}");
        last = wait;
    }
}

#[test]
fn identical_seeds_give_bit_identical_logs() {
    let mut cfg = ScenarioConfig::from_toml_str(include_str!("../../../scenarios/steady.toml")).unwrap();
    cfg.rounds = 40;
    cfg.controller.kind = ControllerKind::SairMock;
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for k in 0..2 {
        let out = run_experiment(&cfg).unwrap();
        let path = dir.path().join(format!("run{k}.jsonl"));
        export::write_jsonl(&out.records, &path).unwrap();
        bytes.push(std::fs::read(&path).unwrap());
    }
    assert!(!bytes[0].is_empty());
    assert_eq!(bytes[0], bytes[1]);

    let other = run_experiment(&cfg.with_seed(cfg.seed + 1)).unwrap();
    let path = dir.path().join("other.jsonl");
    export::write_jsonl(&other.records, &path).unwrap();
    assert_ne!(std::fs::read(&path).unwrap(), bytes[0]);
}
