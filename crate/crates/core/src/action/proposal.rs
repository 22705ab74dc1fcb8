//! Absolute-target proposals in the policy's JSON action schema.
//!
//! ```json
//! {"preprocessing": {"action": "scale_replicas", "replicas": 3},
//!  "inference": {"action": "adjust_rate", "rate_ratio": 0.7},
//!  "postprocessing": {"action": "none"}}
//! ```

use serde_json::{Map, Value};

use super::validate::{RawDeltas, RawStageDelta};
use super::ScalingAction;
use crate::error::{Result, SairError};
use crate::sim::{ResourceConfig, StageKind};

/// Absolute targets for one stage. Absent fields keep the current value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTarget {
    pub none: bool,
    pub replicas: Option<f64>,
    pub cpu_millicores: Option<f64>,
    pub memory_mb: Option<f64>,
    pub rate_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AbsoluteProposal {
    pub stages: Vec<StageTarget>,
    /// Fields that could not be interpreted and were ignored.
    pub warnings: usize,
}

impl AbsoluteProposal {
    pub fn noop(stages: usize) -> Self {
        Self { stages: vec![StageTarget { none: true, ..Default::default() }; stages], warnings: 0 }
    }

    /// The absolute targets reached by executing `action` from `configs`.
    pub fn from_action(action: &ScalingAction, configs: &[ResourceConfig], kinds: &[StageKind]) -> Self {
        let after = action.apply(configs, kinds);
        let stages = action
            .stages
            .iter()
            .zip(after)
            .map(|(d, cfg)| {
                if d.is_zero() {
                    return StageTarget { none: true, ..Default::default() };
                }
                StageTarget {
                    none: false,
                    replicas: (d.replicas != 0).then_some(cfg.replicas as f64),
                    cpu_millicores: (d.cpu_millicores != 0).then_some(cfg.cpu_millicores as f64),
                    memory_mb: (d.memory_mb != 0).then_some(cfg.memory_mb as f64),
                    rate_ratio: (d.rate_steps != 0).then_some(cfg.rate_ratio),
                }
            })
            .collect();
        Self { stages, warnings: 0 }
    }

    /// Renders the proposal in the JSON action schema, keyed by stage name.
    pub fn to_json(&self, names: &[String], kinds: &[StageKind]) -> Value {
        let mut root = Map::new();
        for ((t, name), kind) in self.stages.iter().zip(names).zip(kinds) {
            let mut obj = Map::new();
            let label = if t.none {
                "none"
            } else {
                let replicas = t.replicas.is_some();
                let resources = t.cpu_millicores.is_some() || t.memory_mb.is_some();
                match (kind, replicas, resources, t.rate_ratio.is_some()) {
                    (StageKind::Gpu, false, _, true) => "adjust_rate",
                    (StageKind::Gpu, true, _, true) => "scale_both",
                    (_, true, true, _) => "scale_both",
                    (_, false, true, _) => "scale_resources",
                    (_, true, false, _) => "scale_replicas",
                    _ => "none",
                }
            };
            obj.insert("action".into(), label.into());
            if !t.none {
                if let Some(v) = t.replicas {
                    obj.insert("replicas".into(), (v.round() as i64).into());
                }
                if let Some(v) = t.cpu_millicores {
                    obj.insert("cpu_millicores".into(), (v.round() as i64).into());
                }
                if let Some(v) = t.memory_mb {
                    obj.insert("memory_mb".into(), (v.round() as i64).into());
                }
                if let Some(v) = t.rate_ratio {
                    obj.insert("rate_ratio".into(), ((v * 100.0).round() / 100.0).into());
                }
            }
            root.insert(name.clone(), Value::Object(obj));
        }
        Value::Object(root)
    }
}

/// Extracts the outermost JSON object from free text (e.g. a fenced code block).
fn extract_object(text: &str) -> Option<Map<String, Value>> {
    if let Ok(Value::Object(m)) = serde_json::from_str(text.trim()) {
        return Some(m);
    }
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    if end <= start {
        return None;
    }
    match serde_json::from_str(&text[start..=end]) {
        Ok(Value::Object(m)) => Some(m),
        _ => None,
    }
}

/// Numeric field with lenient coercion: numbers, numeric strings and booleans are
/// not rejected outright; anything else yields `Err`.
fn coerce_number(v: &Value) -> std::result::Result<Option<f64>, ()> {
    match v {
        Value::Null => Ok(None),
        Value::Number(n) => n.as_f64().filter(|x| x.is_finite()).map(Some).ok_or(()),
        Value::String(s) => {
            let s = s.trim();
            if s.is_empty() || s.eq_ignore_ascii_case("none") {
                return Ok(None);
            }
            s.trim_end_matches('m').trim().parse::<f64>().ok().filter(|x| x.is_finite()).map(Some).ok_or(())
        }
        _ => Err(()),
    }
}

/// Parses a proposal. Stages are matched by name (case-insensitive); unknown stages are
/// ignored and missing stages keep their allocation. Unparseable fields are dropped with
/// a warning. Fails only when the text holds no JSON object.
pub fn parse_proposal(text: &str, names: &[String]) -> Result<AbsoluteProposal> {
    let root = extract_object(text).ok_or_else(|| SairError::Policy("response holds no JSON object".into()))?;
    let mut out = AbsoluteProposal { stages: vec![StageTarget::default(); names.len()], warnings: 0 };
    for (key, value) in &root {
        let Some(idx) = names.iter().position(|n| n.eq_ignore_ascii_case(key)) else {
            log::warn!("proposal names unknown stage {key:?}; ignored");
            out.warnings += 1;
            continue;
        };
        let target = &mut out.stages[idx];
        let obj = match value {
            Value::Object(o) => o,
            Value::String(s) if s.eq_ignore_ascii_case("none") => {
                target.none = true;
                continue;
            }
            _ => {
                log::warn!("stage {key:?}: expected an object, got {value}");
                out.warnings += 1;
                continue;
            }
        };
        if let Some(Value::String(a)) = obj.get("action") {
            if a.eq_ignore_ascii_case("none") {
                target.none = true;
                continue;
            }
        }
        let mut field = |name: &str| -> Option<f64> {
            let v = obj.get(name)?;
            match coerce_number(v) {
                Ok(x) => x,
                Err(()) => {
                    log::warn!("stage {key:?}: cannot read {name} = {v}; treated as unchanged");
                    out.warnings += 1;
                    None
                }
            }
        };
        let replicas = field("replicas");
        let cpu_millicores = field("cpu_millicores");
        let memory_mb = field("memory_mb");
        let rate_ratio = field("rate_ratio");
        out.stages[idx] = StageTarget { none: false, replicas, cpu_millicores, memory_mb, rate_ratio };
    }
    Ok(out)
}

/// Per-field `target - current`; absent fields and "none" stages give zero.
pub fn absolute_to_delta(proposal: &AbsoluteProposal, configs: &[ResourceConfig]) -> RawDeltas {
    let stages = configs
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            let t = proposal.stages.get(i).copied().unwrap_or_default();
            if t.none {
                return RawStageDelta::default();
            }
            RawStageDelta {
                replicas: t.replicas.map_or(0.0, |v| v - cfg.replicas as f64),
                cpu_millicores: t.cpu_millicores.map_or(0.0, |v| v - cfg.cpu_millicores as f64),
                memory_mb: t.memory_mb.map_or(0.0, |v| v - cfg.memory_mb as f64),
                rate_ratio: t.rate_ratio.map_or(0.0, |v| v - cfg.rate_ratio),
            }
        })
        .collect();
    RawDeltas { stages }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{validate, CooldownState, StageDelta};

    fn names() -> Vec<String> {
        ["preprocessing", "inference", "postprocessing"].map(String::from).to_vec()
    }

    fn configs() -> Vec<ResourceConfig> {
        vec![
            ResourceConfig { replicas: 2, ..Default::default() },
            ResourceConfig { rate_ratio: 0.5, ..Default::default() },
            ResourceConfig::default(),
        ]
    }

    #[test]
    fn deltas_from_absolute_targets() {
        let text = r#"{"preprocessing": {"action": "scale_replicas", "replicas": 3},
                       "inference": {"action": "adjust_rate", "rate_ratio": 0.9},
                       "postprocessing": {"action": "none", "replicas": 5}}"#;
        let p = parse_proposal(text, &names()).unwrap();
        let raw = absolute_to_delta(&p, &configs());
        assert_eq!(raw.stages[0].replicas, 1.0);
        assert!((raw.stages[1].rate_ratio - 0.4).abs() < 1e-12);
        assert_eq!(raw.stages[2], RawStageDelta::default());
        assert_eq!(p.warnings, 0);
    }

    #[test]
    fn lenient_fields() {
        let text = "Here you go:\n```json\n{\"Preprocessing\": {\"action\": \"scale_both\", \"replicas\": \"3\", \
                    \"cpu_millicores\": \"1500m\", \"memory_mb\": [1]}, \"decoder\": {}}\n```";
        let p = parse_proposal(text, &names()).unwrap();
        assert_eq!(p.stages[0].replicas, Some(3.0));
        assert_eq!(p.stages[0].cpu_millicores, Some(1500.0));
        assert_eq!(p.stages[0].memory_mb, None);
        assert_eq!(p.warnings, 2);
        let raw = absolute_to_delta(&p, &configs());
        assert_eq!(raw.stages[0].memory_mb, 0.0);
        assert_eq!(raw.stages[1], RawStageDelta::default());
    }

    #[test]
    fn malformed_text_is_an_error() {
        assert!(parse_proposal("scale up please", &names()).is_err());
        assert!(parse_proposal("{\"a\": ", &names()).is_err());
        assert!(parse_proposal("[1, 2]", &names()).is_err());
    }

    #[test]
    fn render_round_trips_through_parser() {
        let kinds = [StageKind::Cpu, StageKind::Gpu, StageKind::Cpu];
        let action = ScalingAction {
            stages: vec![
                StageDelta { replicas: 1, cpu_millicores: 500, ..Default::default() },
                StageDelta::rate(2),
                StageDelta::default(),
            ],
        };
        let prop = AbsoluteProposal::from_action(&action, &configs(), &kinds);
        let json = prop.to_json(&names(), &kinds);
        assert_eq!(json["preprocessing"]["action"], "scale_both");
        assert_eq!(json["inference"]["action"], "adjust_rate");
        assert_eq!(json["postprocessing"]["action"], "none");
        let parsed = parse_proposal(&json.to_string(), &names()).unwrap();
        let raw = absolute_to_delta(&parsed, &configs());
        let again = validate(&raw, &configs(), &kinds, &CooldownState::new(3), 0.0);
        assert_eq!(again, action);
    }
}
