//! Prompt assembly for the language-model policy.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::action::{AbsoluteProposal, ScalingAction};
use crate::experience::Experience;
use crate::sim::{PipelineState, ResourceConfig, StageKind, N_MAX, N_MIN, STAGE_FEATURES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    /// Upper bound on the prompt size, estimated at four characters per token.
    pub token_budget: usize,
    /// Optional spending cap shown to the model ($/hour).
    pub budget_per_hour: Option<f64>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self { token_budget: 8000, budget_per_hour: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub episodes: String,
    pub current_input: String,
    pub constraints: String,
    pub schema: String,
    pub included: usize,
    /// Episodes dropped to respect the token budget.
    pub dropped: usize,
}

impl PromptBundle {
    pub fn system(&self) -> String {
        format!("{}\n\n{}", self.constraints, self.schema)
    }

    pub fn user(&self) -> String {
        if self.episodes.is_empty() {
            self.current_input.clone()
        } else {
            format!("Past episodes, lowest reward first:\n\n{}\n{}", self.episodes, self.current_input)
        }
    }

    pub fn render(&self) -> String {
        format!("{}\n\n{}", self.system(), self.user())
    }

    pub fn estimated_tokens(&self) -> usize {
        estimate_tokens(&self.render())
    }
}

pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Per-stage configs encoded in a context vector.
fn configs_from_context(context: &[f64], kinds: &[StageKind]) -> Vec<ResourceConfig> {
    kinds
        .iter()
        .enumerate()
        .map(|(i, kind)| {
            let f = context.get(i * STAGE_FEATURES..(i + 1) * STAGE_FEATURES);
            match f {
                Some(f) => ResourceConfig {
                    replicas: f[0].round().clamp(N_MIN as f64, N_MAX as f64) as u32,
                    cpu_millicores: f[1].round().max(0.0) as u32,
                    memory_mb: f[2].round().max(0.0) as u32,
                    rate_ratio: if *kind == StageKind::Gpu { f[3] } else { 1.0 },
                },
                None => ResourceConfig::default(),
            }
        })
        .collect()
}

fn render_stage_lines(out: &mut String, name: &str, kind: StageKind, f: &[f64], detailed: bool) {
    let _ = write!(out, "  {name}: replicas={}, queue={}", f[0].round() as i64, f[4].round() as i64);
    if detailed {
        match kind {
            StageKind::Cpu => {
                let _ = write!(out, ", cpu_millicores={}, memory_mb={}", f[1].round() as i64, f[2].round() as i64);
            }
            StageKind::Gpu => {
                let _ = write!(out, ", rate_ratio={:.2}", f[3]);
            }
        }
    }
    out.push('\n');
    match kind {
        StageKind::Cpu => {
            let _ = writeln!(out, "    CPU_usage={:.1}", f[5] * 100.0);
        }
        StageKind::Gpu => {
            let _ = writeln!(out, "    GPU_usage={:.1}", f[6] * 100.0);
        }
    }
}

/// One in-context episode block.
pub fn render_episode(e: &Experience, names: &[String], kinds: &[StageKind]) -> String {
    let mut out = String::new();
    let label = if e.reward > 0.0 { "GOOD" } else { "BAD" };
    let _ = writeln!(out, "Episode (Reward: {:+.2} {label}):", e.reward);
    out.push_str("Input:\n");
    for (i, (name, kind)) in names.iter().zip(kinds).enumerate() {
        if let Some(f) = e.context.get(i * STAGE_FEATURES..(i + 1) * STAGE_FEATURES) {
            render_stage_lines(&mut out, name, *kind, f, false);
        }
    }
    let p99 = e.context.get(kinds.len() * STAGE_FEATURES).copied().unwrap_or(f64::NAN);
    let _ = writeln!(out, "  E2E Latency: p99={}ms", p99.round() as i64);
    out.push_str("Prediction:\n");
    let configs = configs_from_context(&e.context, kinds);
    let action: &ScalingAction = &e.action;
    let json = AbsoluteProposal::from_action(action, &configs, kinds).to_json(names, kinds);
    let _ = writeln!(out, "  {json}");
    let _ = writeln!(out, "Reward: {:+.2}", e.reward);
    out
}

pub fn render_current_input(state: &PipelineState, t_sla_ms: f64) -> String {
    let mut out = String::from("Current pipeline state:\n");
    for s in &state.stages {
        let f = [
            s.config.replicas as f64,
            s.config.cpu_millicores as f64,
            s.config.memory_mb as f64,
            s.config.rate_ratio,
            s.queue_depth as f64,
            s.cpu_util,
            s.gpu_util_quota,
        ];
        render_stage_lines(&mut out, &s.name, s.kind, &f, true);
    }
    let _ = writeln!(
        out,
        "  E2E Latency: p99={}ms, mean={}ms, throughput={:.1} req/s",
        state.p99_ms.round() as i64,
        state.mean_ms.round() as i64,
        state.throughput_rps
    );
    let _ = writeln!(out, "  SLA target: p99 <= {}ms", t_sla_ms.round() as i64);
    out
}

pub fn render_constraints(cfg: &PromptConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Limits: every stage runs between {N_MIN} and {N_MAX} replicas. One decision changes replicas by -1 to +2, \
         CPU by at most 500 millicores, memory by at most 256 MB, and a GPU rate_ratio by -0.1 to +0.2 within [0.1, 1.0]. \
         CPU stages accept replicas, cpu_millicores and memory_mb; GPU stages accept replicas and rate_ratio."
    );
    if let Some(b) = cfg.budget_per_hour {
        let _ = writeln!(out, "Spending cap: ${b:.2}/hour.");
    }
    out.push_str(
        "Guidelines: meet the p99 SLA first, then lower cost. Cutting capacity sharply is risky. A p99 above the SLA \
         means the pipeline fell behind, even if utilization now looks low. Favor the stage with the highest \
         utilization or the longest queue. If scaling a stage in a past episode did not reduce latency, try another stage.",
    );
    out
}

pub fn render_schema(names: &[String], kinds: &[StageKind]) -> String {
    let mut out = String::from(
        "Reply with one JSON object and nothing else. Give absolute targets, not changes. Keys are stage names:\n{",
    );
    for (i, (name, kind)) in names.iter().zip(kinds).enumerate() {
        if i > 0 {
            out.push(',');
        }
        match kind {
            StageKind::Cpu => {
                let _ = write!(
                    out,
                    "\n  \"{name}\": {{\"action\": \"scale_replicas\"|\"scale_resources\"|\"scale_both\"|\"none\", \
                     \"replicas\": <int>, \"cpu_millicores\": <int>, \"memory_mb\": <int>}}"
                );
            }
            StageKind::Gpu => {
                let _ = write!(
                    out,
                    "\n  \"{name}\": {{\"action\": \"adjust_rate\"|\"scale_replicas\"|\"none\", \
                     \"replicas\": <int>, \"rate_ratio\": <float in [0.1, 1]>}}"
                );
            }
        }
    }
    out.push_str("\n}");
    out
}

/// Builds the prompt. Episodes are rendered in ascending reward order; when the budget
/// is exceeded the lowest-reward episodes are dropped first.
pub fn build_prompt(state: &PipelineState, experiences: &[Experience], t_sla_ms: f64, cfg: &PromptConfig) -> PromptBundle {
    let names = state.stage_names();
    let kinds = state.kinds();
    let mut ordered: Vec<&Experience> = experiences.iter().collect();
    ordered.sort_by(|a, b| a.reward.total_cmp(&b.reward).then(a.round.cmp(&b.round)));
    let blocks: Vec<String> = ordered.iter().map(|e| render_episode(e, &names, &kinds)).collect();

    let mut bundle = PromptBundle {
        episodes: String::new(),
        current_input: render_current_input(state, t_sla_ms),
        constraints: render_constraints(cfg),
        schema: render_schema(&names, &kinds),
        included: 0,
        dropped: 0,
    };
    let mut start = 0;
    loop {
        bundle.episodes = blocks[start..].join("\n");
        bundle.included = blocks.len() - start;
        bundle.dropped = start;
        if start == blocks.len() || bundle.estimated_tokens() <= cfg.token_budget {
            break;
        }
        start += 1;
    }
    if bundle.dropped > 0 {
        log::info!("prompt budget: dropped {} lowest-reward episodes", bundle.dropped);
    }
    bundle
}
