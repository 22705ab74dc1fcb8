//! Per-round CSV, JSON lines and summary files.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::runner::{EpisodeRecord, RunOutput, RunSummary};
use crate::action::ScalingAction;
use crate::error::{Result, SairError};

/// Flat per-round row for spreadsheets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub round: u64,
    pub time_s: f64,
    pub source: String,
    pub probe_stage: Option<usize>,
    pub action: String,
    pub epsilon: f64,
    pub p99_ms: f64,
    pub mean_ms: f64,
    pub throughput_rps: f64,
    pub cost_billable: f64,
    pub cost_effective: f64,
    pub r_latency: f64,
    pub r_cost: f64,
    pub r_sla: f64,
    pub r_proactive: f64,
    pub r_pareto: f64,
    pub reward: f64,
    pub clipped: bool,
    pub stored: bool,
    pub buffer_len: usize,
    pub replicas: String,
    pub rate_ratios: String,
    pub oracle_action: Option<String>,
    pub oracle_reward: Option<f64>,
    pub regret: Option<f64>,
    pub xi: Option<f64>,
    pub eta: Option<f64>,
}

pub const CSV_HEADER: [&str; 27] = [
    "round",
    "time_s",
    "source",
    "probe_stage",
    "action",
    "epsilon",
    "p99_ms",
    "mean_ms",
    "throughput_rps",
    "cost_billable",
    "cost_effective",
    "r_latency",
    "r_cost",
    "r_sla",
    "r_proactive",
    "r_pareto",
    "reward",
    "clipped",
    "stored",
    "buffer_len",
    "replicas",
    "rate_ratios",
    "oracle_action",
    "oracle_reward",
    "regret",
    "xi",
    "eta",
];

/// Compact action text, e.g. `preprocess:n+1,c+500;inference:rho+0.1`, or `noop`.
pub fn action_label(action: &ScalingAction, names: &[String]) -> String {
    let parts: Vec<String> = action
        .stages
        .iter()
        .enumerate()
        .filter(|(_, d)| !d.is_zero())
        .map(|(i, d)| {
            let mut f = Vec::new();
            if d.replicas != 0 {
                f.push(format!("n{:+}", d.replicas));
            }
            if d.cpu_millicores != 0 {
                f.push(format!("c{:+}", d.cpu_millicores));
            }
            if d.memory_mb != 0 {
                f.push(format!("m{:+}", d.memory_mb));
            }
            if d.rate_steps != 0 {
                f.push(format!("rho{:+.1}", d.rate_delta()));
            }
            let name = names.get(i).cloned().unwrap_or_else(|| format!("s{i}"));
            format!("{name}:{}", f.join(","))
        })
        .collect();
    if parts.is_empty() {
        "noop".into()
    } else {
        parts.join(";")
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join("|")
}

impl CsvRow {
    pub fn from_record(r: &EpisodeRecord, names: &[String]) -> Self {
        Self {
            round: r.round,
            time_s: r.time_s,
            source: r.source.as_str().to_string(),
            probe_stage: r.probe_stage,
            action: action_label(&r.action, names),
            epsilon: r.epsilon,
            p99_ms: r.p99_ms,
            mean_ms: r.mean_ms,
            throughput_rps: r.throughput_rps,
            cost_billable: r.cost_billable,
            cost_effective: r.cost_effective,
            r_latency: r.reward.r_latency,
            r_cost: r.reward.r_cost,
            r_sla: r.reward.r_sla,
            r_proactive: r.reward.r_proactive,
            r_pareto: r.reward.r_pareto,
            reward: r.reward.total,
            clipped: r.reward.clipped,
            stored: r.stored,
            buffer_len: r.buffer_len,
            replicas: join(&r.replicas),
            rate_ratios: join(&r.rate_ratios),
            oracle_action: r.oracle_action.as_ref().map(|a| action_label(a, names)),
            oracle_reward: r.oracle_reward,
            regret: r.regret.regret,
            xi: r.regret.xi,
            eta: r.regret.eta,
        }
    }
}

/// Writes the per-round CSV. The header is written even when there are no rows.
pub fn write_csv(records: &[EpisodeRecord], names: &[String], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(CsvRow::from_record(r, names))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(SairError::from)).collect()
}

pub fn write_jsonl(records: &[EpisodeRecord], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an episode log. Blank lines are ignored; a malformed line is an error.
pub fn read_jsonl(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| SairError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

pub fn write_summary(summary: &RunSummary, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, summary)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Creates the directory and checks that a file can be written there.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| SairError::Config(format!("output directory {} is not usable: {e}", dir.display())))?;
    let probe = dir.join(".sair-write-check");
    File::create(&probe)
        .and_then(|mut f| f.write_all(b"ok"))
        .map_err(|e| SairError::Config(format!("output directory {} is not writable: {e}", dir.display())))?;
    let _ = fs::remove_file(probe);
    Ok(())
}

/// Files written for one run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Exported {
    pub csv: PathBuf,
    pub jsonl: PathBuf,
    pub summary: PathBuf,
    pub plots: Vec<PathBuf>,
}

/// Writes `<prefix>.csv`, `<prefix>.jsonl`, `<prefix>.summary.json` and the trajectory
/// plot into `dir`.
pub fn export_run(out: &RunOutput, names: &[String], dir: &Path, prefix: &str, plots: bool) -> Result<Exported> {
    ensure_writable(dir)?;
    let files = Exported {
        csv: dir.join(format!("{prefix}.csv")),
        jsonl: dir.join(format!("{prefix}.jsonl")),
        summary: dir.join(format!("{prefix}.summary.json")),
        plots: if plots { vec![dir.join(format!("{prefix}.trajectory.svg"))] } else { Vec::new() },
    };
    write_csv(&out.records, names, &files.csv)?;
    write_jsonl(&out.records, &files.jsonl)?;
    write_summary(&out.summary, &files.summary)?;
    if let Some(p) = files.plots.first() {
        super::plots::plot_trajectories(&out.records, &out.summary.scenario, p)?;
    }
    Ok(files)
}
