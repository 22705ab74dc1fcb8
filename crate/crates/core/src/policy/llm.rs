//! Chat-completions client for the language-model policy.

use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::prompt::{build_prompt, PromptConfig};
use super::{DecisionContext, PolicyBackend};
use crate::action::{parse_proposal, AbsoluteProposal, ActionSource};
use crate::error::{Result, SairError};

pub const ENV_ENDPOINT: &str = "SAIR_LLM_ENDPOINT";
pub const ENV_MODEL: &str = "SAIR_LLM_MODEL";
pub const ENV_API_KEY: &str = "SAIR_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: &str, content: impl Into<String>) -> Self {
        Self { role: role.to_string(), content: content.into() }
    }
}

/// Sends a conversation and returns the assistant's reply text.
pub trait ChatTransport: Send {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    /// Request deadline; must stay below the decision interval.
    pub timeout_s: f64,
    /// Per-round prompt and response dumps.
    pub dump_dir: Option<PathBuf>,
    pub prompt: PromptConfig,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: "default".into(),
            api_key: None,
            temperature: None,
            max_tokens: None,
            timeout_s: 10.0,
            dump_dir: None,
            prompt: PromptConfig::default(),
        }
    }
}

impl LlmConfig {
    /// Overrides endpoint, model and key from the environment when set.
    pub fn with_env(mut self) -> Self {
        if let Ok(v) = std::env::var(ENV_ENDPOINT) {
            self.endpoint = v;
        }
        if let Ok(v) = std::env::var(ENV_MODEL) {
            self.model = v;
        }
        if let Ok(v) = std::env::var(ENV_API_KEY) {
            self.api_key = Some(v);
        }
        self
    }
}

/// Blocking HTTP transport for chat-completions style endpoints.
pub struct HttpTransport {
    agent: ureq::Agent,
    cfg: LlmConfig,
}

impl HttpTransport {
    pub fn new(cfg: LlmConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_s.max(0.1))))
            .build()
            .into();
        Self { agent, cfg }
    }
}

/// Request body in the chat-completions shape.
pub fn request_body(cfg: &LlmConfig, messages: &[ChatMessage]) -> Value {
    let mut body = json!({ "model": cfg.model, "messages": messages });
    if let Some(t) = cfg.temperature {
        body["temperature"] = json!(t);
    }
    if let Some(m) = cfg.max_tokens {
        body["max_tokens"] = json!(m);
    }
    body
}

/// Assistant text from a chat-completions response.
pub fn response_text(v: &Value) -> Result<String> {
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| SairError::Policy("response has no choices[0].message.content".into()))
}

impl ChatTransport for HttpTransport {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        let mut req = self.agent.post(&self.cfg.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.cfg.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(request_body(&self.cfg, messages))
            .map_err(|e| SairError::Policy(format!("request failed: {e}")))?;
        let v: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| SairError::Policy(format!("unreadable response: {e}")))?;
        response_text(&v)
    }
}

/// Replays canned replies in order, then repeats the last one. Useful for tests and
/// offline runs.
pub struct ScriptedTransport {
    replies: Vec<String>,
    next: Mutex<usize>,
    pub seen: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedTransport {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self { replies: replies.into_iter().map(Into::into).collect(), next: Mutex::new(0), seen: Mutex::new(Vec::new()) }
    }
}

impl ChatTransport for ScriptedTransport {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        self.seen.lock().expect("poisoned").push(messages.to_vec());
        let mut i = self.next.lock().expect("poisoned");
        let reply = self
            .replies
            .get(*i)
            .or(self.replies.last())
            .cloned()
            .ok_or_else(|| SairError::Policy("no scripted reply".into()))?;
        *i += 1;
        Ok(reply)
    }
}

pub struct LlmPolicy {
    transport: Box<dyn ChatTransport>,
    cfg: LlmConfig,
    /// Malformed replies seen so far.
    pub malformed: u64,
}

impl LlmPolicy {
    pub fn new(transport: Box<dyn ChatTransport>, cfg: LlmConfig) -> Self {
        Self { transport, cfg, malformed: 0 }
    }

    pub fn http(cfg: LlmConfig) -> Self {
        Self::new(Box::new(HttpTransport::new(cfg.clone())), cfg)
    }

    fn dump(&self, round: u64, name: &str, text: &str) {
        if let Some(dir) = &self.cfg.dump_dir {
            let path = dir.join(format!("round{round:05}_{name}.txt"));
            if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, text)) {
                log::warn!("cannot write {}: {e}", path.display());
            }
        }
    }
}

impl PolicyBackend for LlmPolicy {
    fn source(&self) -> ActionSource {
        ActionSource::Llm
    }

    fn malformed_replies(&self) -> u64 {
        self.malformed
    }

    /// One request, plus one re-ask with an error hint if the reply is not a JSON object.
    fn propose(&mut self, ctx: &DecisionContext) -> Result<AbsoluteProposal> {
        let bundle = build_prompt(ctx.state, ctx.experiences, ctx.t_sla_ms, &self.cfg.prompt);
        let names = ctx.state.stage_names();
        let mut messages = vec![ChatMessage::new("system", bundle.system()), ChatMessage::new("user", bundle.user())];
        self.dump(ctx.round, "prompt", &bundle.render());
        for attempt in 0..2 {
            let reply = self.transport.complete(&messages)?;
            self.dump(ctx.round, &format!("response{attempt}"), &reply);
            match parse_proposal(&reply, &names) {
                Ok(p) => return Ok(p),
                Err(e) => {
                    self.malformed += 1;
                    log::warn!("round {}: malformed policy reply (attempt {}): {e}", ctx.round, attempt + 1);
                    messages.push(ChatMessage::new("assistant", reply));
                    messages.push(ChatMessage::new(
                        "user",
                        format!("Your reply could not be parsed ({e}). Answer again with only the JSON object."),
                    ));
                }
            }
        }
        Err(SairError::Policy("two malformed replies".into()))
    }
}
