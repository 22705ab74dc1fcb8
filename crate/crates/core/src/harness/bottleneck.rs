//! Bottleneck identification from forced scale-up probes on a labeled synthetic suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, ControllerKind, ScenarioConfig};
use super::runner::{actuate, build_simulator, run_interval, RewardContext};
use crate::action::{ScalingAction, StageDelta};
use crate::error::Result;
use crate::policy::ProbeKind;
use crate::sim::{StageSpec, WorkloadPattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BottleneckClass {
    Preprocessing,
    Inference,
    Postprocessing,
    Multiple,
}

impl BottleneckClass {
    pub const ALL: [Self; 4] = [Self::Preprocessing, Self::Inference, Self::Postprocessing, Self::Multiple];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_stage(stage: usize) -> Self {
        Self::ALL[stage.min(2)]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Preprocessing => "preprocessing",
            Self::Inference => "inference",
            Self::Postprocessing => "postprocessing",
            Self::Multiple => "multiple",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScenario {
    pub label: BottleneckClass,
    pub cfg: ScenarioConfig,
}

/// Three-stage pipelines (CPU pre, GPU inference, CPU post) where the labeled stage(s)
/// serve at 30% of the others' rate. Classes are balanced.
pub fn bottleneck_suite(n: usize, seed: u64) -> Vec<LabeledScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = BottleneckClass::ALL[i % 4];
            let fast: f64 = rng.random_range(20.0..40.0);
            let slow = 0.3 * fast;
            let slow_stages: Vec<usize> = match label {
                BottleneckClass::Multiple => {
                    let skip = rng.random_range(0..3);
                    (0..3).filter(|&s| s != skip).collect()
                }
                other => vec![other.index()],
            };
            let rate = |s: usize| if slow_stages.contains(&s) { slow } else { fast };
            let stages = vec![
                StageSpec::cpu("preprocess", rate(0)),
                StageSpec::gpu("inference", rate(1)),
                StageSpec::cpu("postprocess", rate(2)),
            ];
            let util: f64 = rng.random_range(0.7..0.8);
            let lambda = util * slow;
            // expected operating latency: M/M/1 sojourn p99 of each slow stage plus the
            // service time of the fast ones
            let p99_ms: f64 = slow_stages.iter().map(|_| 1000.0 * 100f64.ln() / (slow - lambda)).sum::<f64>()
                + (3 - slow_stages.len()) as f64 * 1000.0 / fast;
            let mut cfg = ScenarioConfig {
                name: format!("bottleneck-{i:03}-{}", label.as_str()),
                rounds: 0,
                seed: derive_seed(seed, i as u64 + 100),
                stages,
                workload: WorkloadPattern::poisson(lambda, 0),
                sim: Default::default(),
                timing: Default::default(),
                controller: Default::default(),
                reward: Default::default(),
                cost: Default::default(),
                oracle: Default::default(),
            };
            // a loose SLA keeps the proactive bonus, which is identical for every probe,
            // out of the comparison
            cfg.reward.t_sla_ms = 3.0 * p99_ms;
            cfg.reward.l_baseline_ms = Some(p99_ms);
            cfg.controller.kind = ControllerKind::SairMock;
            cfg.controller.probe = ProbeKind::ScaleUp;
            LabeledScenario { label, cfg }
        })
        .collect()
}

/// Probe outcomes for one scenario: `success[stage][k]` tells whether the k-th scale-up
/// of that stage earned more reward than an independently seeded no-op interval.
pub fn probe_outcomes(cfg: &ScenarioConfig, probes: usize) -> Result<Vec<Vec<bool>>> {
    let rctx = RewardContext::from_scenario(cfg)?;
    let frontier = rctx.new_frontier()?;
    let mut warm = build_simulator(cfg)?;
    warm.run_for(cfg.timing.warmup_s.max(cfg.timing.interval_s), cfg.timing.dt_s)?;
    warm.begin_window();
    warm.run_for(cfg.timing.interval_s - cfg.timing.settle_s, cfg.timing.dt_s)?;
    let state = warm.snapshot();
    let _ = warm.drain_latencies();
    let before = rctx.observe(state.p99_ms, &warm.configs());
    let n = rctx.kinds.len();

    let rollout = |k: usize, stage: Option<usize>| -> Result<f64> {
        let mut sim = warm.clone();
        let stream = (k * (n + 1) + stage.map_or(n, |s| s)) as u64;
        sim.reseed_arrivals(derive_seed(cfg.seed, 1000 + 2 * stream));
        sim.reseed_service(derive_seed(cfg.seed, 1001 + 2 * stream));
        let action = match stage {
            Some(s) => ScalingAction::single(n, s, StageDelta::replicas(1)),
            None => ScalingAction::noop(n),
        };
        actuate(&mut sim, &action)?;
        let (after_state, _) = run_interval(&mut sim, &cfg.timing)?;
        let after = rctx.observe(after_state.p99_ms, &sim.configs());
        Ok(rctx.score(before, after, &action, &frontier)?.total)
    };

    let mut success = vec![Vec::with_capacity(probes); n];
    for k in 0..probes {
        let noop = rollout(k, None)?;
        for (s, row) in success.iter_mut().enumerate() {
            row.push(rollout(k, Some(s))? > noop);
        }
    }
    Ok(success)
}

/// Stage with the most successful scale-ups; "multiple" when the runner-up is within
/// `margin` of the leader.
pub fn classify(successes: &[usize], margin: f64) -> BottleneckClass {
    let mut order: Vec<usize> = (0..successes.len()).collect();
    order.sort_by(|&a, &b| successes[b].cmp(&successes[a]).then(a.cmp(&b)));
    let top = successes[order[0]] as f64;
    if order.len() > 1 && top > 0.0 && successes[order[1]] as f64 >= (1.0 - margin) * top {
        BottleneckClass::Multiple
    } else {
        BottleneckClass::from_stage(order[0])
    }
}

/// Rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 4]; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: BottleneckClass,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

impl ConfusionMatrix {
    pub fn add(&mut self, truth: BottleneckClass, predicted: BottleneckClass) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            return 0.0;
        }
        (0..4).map(|i| self.counts[i][i]).sum::<u64>() as f64 / t as f64
    }

    pub fn class_metrics(&self) -> Vec<ClassMetrics> {
        BottleneckClass::ALL
            .iter()
            .map(|&c| {
                let i = c.index();
                let tp = self.counts[i][i] as f64;
                let predicted: u64 = (0..4).map(|r| self.counts[r][i]).sum();
                let support: u64 = self.counts[i].iter().sum();
                let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
                let recall = if support > 0 { tp / support as f64 } else { 0.0 };
                let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
                ClassMetrics { class: c, precision, recall, f1, support }
            })
            .collect()
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:<16}", "true \\ pred");
        for c in BottleneckClass::ALL {
            out.push_str(&format!("{:>16}", c.as_str()));
        }
        out.push('\n');
        for c in BottleneckClass::ALL {
            out.push_str(&format!("{:<16}", c.as_str()));
            for v in self.counts[c.index()] {
                out.push_str(&format!("{v:>16}"));
            }
            out.push('\n');
        }
        out.push_str(&format!("\n{:<16}{:>10}{:>10}{:>10}{:>10}\n", "class", "precision", "recall", "f1", "support"));
        for m in self.class_metrics() {
            out.push_str(&format!(
                "{:<16}{:>10.3}{:>10.3}{:>10.3}{:>10}\n",
                m.class.as_str(),
                m.precision,
                m.recall,
                m.f1,
                m.support
            ));
        }
        out.push_str(&format!("accuracy: {:.3}\n", self.accuracy()));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottleneckReport {
    pub probes_per_stage: usize,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
}

/// Detection quality for each probe budget. Smaller budgets use a prefix of the largest
/// budget's probes.
pub fn evaluate_bottleneck_detection(
    suite: &[LabeledScenario],
    probe_counts: &[usize],
    margin: f64,
) -> Result<Vec<BottleneckReport>> {
    let m_max = probe_counts.iter().copied().max().unwrap_or(0);
    let outcomes: Vec<Vec<Vec<bool>>> =
        suite.par_iter().map(|s| probe_outcomes(&s.cfg, m_max)).collect::<Result<_>>()?;
    Ok(probe_counts
        .iter()
        .map(|&m| {
            let mut confusion = ConfusionMatrix::default();
            for (s, out) in suite.iter().zip(&outcomes) {
                let counts: Vec<usize> = out.iter().map(|row| row[..m].iter().filter(|&&b| b).count()).collect();
                confusion.add(s.label, classify(&counts, margin));
            }
            BottleneckReport { probes_per_stage: m, accuracy: confusion.accuracy(), per_class: confusion.class_metrics(), confusion }
        })
        .collect())
}

/// Accuracy of a detector that guesses a class uniformly at random.
pub fn random_detector(suite: &[LabeledScenario], seed: u64) -> ConfusionMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = ConfusionMatrix::default();
    for s in suite {
        m.add(s.label, BottleneckClass::ALL[rng.random_range(0..4)]);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_plurality_and_margin() {
        assert_eq!(classify(&[10, 3, 2], 0.2), BottleneckClass::Preprocessing);
        assert_eq!(classify(&[3, 10, 9], 0.2), BottleneckClass::Multiple);
        assert_eq!(classify(&[3, 10, 7], 0.2), BottleneckClass::Inference);
        assert_eq!(classify(&[0, 0, 0], 0.2), BottleneckClass::Preprocessing);
    }

    #[test]
    fn confusion_metrics() {
        let mut m = ConfusionMatrix::default();
        m.add(BottleneckClass::Inference, BottleneckClass::Inference);
        m.add(BottleneckClass::Inference, BottleneckClass::Multiple);
        m.add(BottleneckClass::Multiple, BottleneckClass::Multiple);
        assert_eq!(m.total(), 3);
        assert!((m.accuracy() - 2.0 / 3.0).abs() < 1e-12);
        let inf = &m.class_metrics()[1];
        assert_eq!((inf.precision, inf.recall), (1.0, 0.5));
        let mult = &m.class_metrics()[3];
        assert_eq!((mult.precision, mult.recall), (0.5, 1.0));
        assert!(m.render().contains("accuracy: 0.667"));
    }

    #[test]
    fn suite_is_balanced_and_valid() {
        let suite = bottleneck_suite(20, 1);
        for c in BottleneckClass::ALL {
            assert_eq!(suite.iter().filter(|s| s.label == c).count(), 5);
        }
        for s in &suite {
            s.cfg.validate().unwrap();
        }
    }
}
