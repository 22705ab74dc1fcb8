use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use sair_core::harness::{
    baseline_variants, bottleneck::random_detector, bottleneck_suite, evaluate_bottleneck_detection, export,
    mean_summary, plots, replay, run_experiment, tuned_index, ControllerKind, RewardTotals, RunSummary, ScenarioConfig,
};
use sair_core::reward::RewardConfig;

#[derive(Parser)]
#[command(name = "sair", version, about = "Simulated in-context RL autoscaler for inference pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run(RunArgs),
    /// Run scenarios for several controllers and seeds; baselines are tuned over their sweeps.
    Sweep(SweepArgs),
    /// Bottleneck identification accuracy on a labeled synthetic suite.
    EvalBottleneck(EvalArgs),
    /// Re-score a persisted episode log.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<u64>,
    /// Overrides the controller kind (sair_mock, sair_llm, static, hpa_cpu, threshold, vpa).
    #[arg(long)]
    controller: Option<String>,
    /// Score every feasible single-stage action each round.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    no_plots: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, required = true, num_args = 1..)]
    config: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "sair_mock,static,hpa_cpu,threshold,vpa")]
    controllers: Vec<String>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, default_value_t = 200)]
    scenarios: usize,
    #[arg(long, value_delimiter = ',', default_value = "4,16,64")]
    probes: Vec<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Relative gap below which the two leading stages are reported as "multiple".
    #[arg(long, default_value_t = 0.2)]
    margin: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// JSON lines episode log written by `run`.
    #[arg(long)]
    log: PathBuf,
    /// Scenario whose reward settings to use; defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    w_latency: Option<f64>,
    #[arg(long)]
    w_cost: Option<f64>,
    #[arg(long)]
    w_proactive: Option<f64>,
    /// Also write a reward-component chart for a grid of weight settings.
    #[arg(long)]
    sensitivity_plot: Option<PathBuf>,
}

fn parse_controller(s: &str) -> Result<ControllerKind> {
    Ok(match s {
        "sair_mock" | "sair-mock" => ControllerKind::SairMock,
        "sair_llm" | "sair-llm" => ControllerKind::SairLlm,
        "static" => ControllerKind::Static,
        "hpa_cpu" | "hpa-cpu" | "hpa" => ControllerKind::HpaCpu,
        "threshold" => ControllerKind::Threshold,
        "vpa" => ControllerKind::Vpa,
        other => bail!("unknown controller {other:?}"),
    })
}

fn stage_names(cfg: &ScenarioConfig) -> Vec<String> {
    cfg.stages.iter().map(|s| s.name.clone()).collect()
}

fn print_summary(s: &RunSummary) {
    println!(
        "{:<28} {:<10} seed={:<4} p99={:>8.1}ms mean={:>7.1}ms cost/1k(eff)=${:.5} reward={:>8.3} events={}",
        s.scenario,
        s.controller,
        s.seed,
        s.p99_ms,
        s.mean_ms,
        s.cost_per_1k_effective,
        s.reward.total,
        s.scaling_events
    );
    if let Some(r) = &s.regret {
        println!(
            "  regret={:.3} bound={:.3} holds={} mean_xi={:.3} mean_eta={:.3} quartiles={:?}",
            r.cumulative_regret,
            r.bound,
            r.bound_holds(),
            r.mean_xi,
            r.mean_eta,
            r.quartile_regret.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        );
    }
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let mut cfg = ScenarioConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(r) = a.rounds {
        cfg.rounds = r;
    }
    if let Some(c) = &a.controller {
        cfg.controller.kind = parse_controller(c)?;
    }
    cfg.oracle.enabled |= a.oracle;
    cfg.validate()?;
    export::ensure_writable(&a.out)?;
    let out = run_experiment(&cfg)?;
    let prefix = format!("{}-{}-s{}", cfg.name, cfg.controller.kind.as_str(), cfg.seed);
    let files = export::export_run(&out, &stage_names(&cfg), &a.out, &prefix, !a.no_plots)?;
    print_summary(&out.summary);
    println!("wrote {}", files.summary.display());
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    export::ensure_writable(&a.out)?;
    let controllers: Vec<ControllerKind> = a.controllers.iter().map(|c| parse_controller(c)).collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for path in &a.config {
        let base = ScenarioConfig::load(path)?;
        let mut tuned = Vec::new();
        for &kind in &controllers {
            let mut cfg = base.clone();
            cfg.controller.kind = kind;
            if let Some(r) = a.rounds {
                cfg.rounds = r;
            }
            let variants = baseline_variants(&cfg);
            let mut aggregated = Vec::new();
            for (vi, v) in variants.iter().enumerate() {
                let outs = sair_core::harness::run_sweep(std::slice::from_ref(v), &a.seeds)?;
                for o in &outs {
                    let prefix = format!("{}-{}-v{vi}-s{}", v.name, kind.as_str(), o.summary.seed);
                    export::export_run(o, &stage_names(v), &a.out, &prefix, false)?;
                    print_summary(&o.summary);
                    rows.push((vi, o.summary.clone()));
                }
                let summaries: Vec<RunSummary> = outs.into_iter().map(|o| o.summary).collect();
                aggregated.push(mean_summary(&summaries).context("no seeds")?);
            }
            let best = tuned_index(&aggregated, base.reward.t_sla_ms).context("no runs")?;
            if variants.len() > 1 {
                println!("{} {}: tuned setting {best} of {}", base.name, kind.as_str(), variants.len());
            }
            tuned.push(aggregated[best].clone());
        }
        let plot = a.out.join(format!("{}.comparison.svg", base.name));
        plots::plot_comparison(&tuned, &plot)?;
        let path = a.out.join(format!("{}.tuned.json", base.name));
        std::fs::write(&path, serde_json::to_string_pretty(&tuned)?)?;
        println!("wrote {} and {}", plot.display(), path.display());
    }
    let mut w = csv_writer(&a.out.join("sweep.csv"))?;
    writeln!(w, "scenario,controller,variant,seed,p99_ms,mean_ms,cost_effective,cost_billable,reward,scaling_events")?;
    for (vi, s) in rows {
        writeln!(
            w,
            "{},{},{vi},{},{},{},{},{},{},{}",
            s.scenario, s.controller, s.seed, s.p99_ms, s.mean_ms, s.cost_effective, s.cost_billable, s.reward.total, s.scaling_events
        )?;
    }
    Ok(())
}

use std::io::Write;

fn csv_writer(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    if a.probes.is_empty() || a.probes.contains(&0) {
        bail!("probe counts must be positive");
    }
    export::ensure_writable(&a.out)?;
    let suite = bottleneck_suite(a.scenarios, a.seed);
    let reports = evaluate_bottleneck_detection(&suite, &a.probes, a.margin)?;
    for r in &reports {
        println!("probes per stage m={}", r.probes_per_stage);
        println!("{}", r.confusion.render());
    }
    let chance = random_detector(&suite, a.seed);
    println!("uniform random detector accuracy: {:.3}", chance.accuracy());
    let path = a.out.join("bottleneck.json");
    std::fs::write(&path, serde_json::to_string_pretty(&reports)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_replay(a: ReplayArgs) -> Result<()> {
    let records = export::read_jsonl(&a.log)?;
    let mut cfg = match &a.config {
        Some(p) => ScenarioConfig::load(p)?.reward_config()?,
        None => RewardConfig::default(),
    };
    if let Some(v) = a.w_latency {
        cfg.w_latency = v;
    }
    if let Some(v) = a.w_cost {
        cfg.w_cost = v;
    }
    if let Some(v) = a.w_proactive {
        cfg.w_proactive = v;
    }
    let res = replay(&records, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&serde_json::json!({
        "rounds": records.len(),
        "changed_rounds": res.changed,
        "totals": res.totals,
    }))?);
    if let Some(path) = a.sensitivity_plot {
        let mut rows: Vec<(String, RewardTotals)> = Vec::new();
        for (label, wl, wc, wp) in [
            ("configured", cfg.w_latency, cfg.w_cost, cfg.w_proactive),
            ("latency only", 1.0, 0.0, 0.0),
            ("cost only", 0.0, 1.0, 0.0),
            ("no proactive", cfg.w_latency, cfg.w_cost, 0.0),
            ("balanced", 0.5, 0.5, cfg.w_proactive),
        ] {
            let c = RewardConfig { w_latency: wl, w_cost: wc, w_proactive: wp, ..cfg.clone() };
            rows.push((label.to_string(), replay(&records, &c)?.totals));
        }
        plots::plot_sensitivity(&rows, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::EvalBottleneck(a) => cmd_eval(a),
        Command::Replay(a) => cmd_replay(a),
    }
}
