//! Decision policies: exploration schedule, random probes, rule-based mock and the
//! language-model backend.

pub mod llm;
mod mock;
mod probe;
pub mod prompt;
mod schedule;

pub use llm::{ChatMessage, ChatTransport, HttpTransport, LlmConfig, LlmPolicy, ScriptedTransport};
pub use mock::MockPolicy;
pub use probe::{random_probe, ProbeKind};
pub use prompt::{build_prompt, render_episode, PromptBundle, PromptConfig};
pub use schedule::ExplorationSchedule;

use rand::Rng;

use crate::action::{absolute_to_delta, AbsoluteProposal, ActionSource, RawDeltas};
use crate::error::Result;
use crate::experience::Experience;
use crate::sim::PipelineState;

/// Inputs available to a policy at a decision point.
#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub state: &'a PipelineState,
    /// Retrieved experiences, ascending reward.
    pub experiences: &'a [Experience],
    /// Kernel similarity of each retrieved experience to the current context.
    pub similarities: &'a [f64],
    pub t_sla_ms: f64,
    pub round: u64,
}

pub trait PolicyBackend: Send {
    fn source(&self) -> ActionSource;

    /// Absolute targets for the next interval.
    fn propose(&mut self, ctx: &DecisionContext) -> Result<AbsoluteProposal>;

    /// Replies that could not be parsed so far.
    fn malformed_replies(&self) -> u64 {
        0
    }
}

/// Unvalidated outcome of one decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub raw: RawDeltas,
    pub source: ActionSource,
    pub probe_stage: Option<usize>,
}

/// Probes with probability epsilon, otherwise asks the backend; backend failures become
/// a no-op. The schedule decays once per call.
pub fn decide<R: Rng + ?Sized>(
    backend: &mut dyn PolicyBackend,
    ctx: &DecisionContext,
    schedule: &mut ExplorationSchedule,
    probe: ProbeKind,
    rng: &mut R,
) -> Decision {
    let kinds = ctx.state.kinds();
    let draw: f64 = rng.random();
    let decision = if draw < schedule.epsilon {
        let (stage, action) = random_probe(&kinds, probe, rng);
        Decision { raw: RawDeltas::from(&action), source: ActionSource::Probe, probe_stage: Some(stage) }
    } else {
        match backend.propose(ctx) {
            Ok(p) => Decision { raw: absolute_to_delta(&p, &ctx.state.configs()), source: backend.source(), probe_stage: None },
            Err(e) => {
                log::warn!("round {}: policy backend failed ({e}); executing no-op", ctx.round);
                Decision {
                    raw: absolute_to_delta(&AbsoluteProposal::noop(kinds.len()), &ctx.state.configs()),
                    source: ActionSource::Fallback,
                    probe_stage: None,
                }
            }
        }
    };
    schedule.decay_once();
    decision
}
