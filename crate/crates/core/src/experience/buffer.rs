use serde::{Deserialize, Serialize};

use super::kernel::{median_pairwise_distance, similarity, RunningStats};
use super::selection::{greedy_select, SelectionConfig};
use super::surprise::{local_loo_mean, loo_means, surprisal};
use crate::action::{ActionSource, ScalingAction};
use crate::error::{Result, SairError};

/// Bandwidth used before the buffer has two distinct contexts.
const FALLBACK_SIGMA: f64 = 1.0;
const SIGMA_REFRESH: usize = 50;

/// One decision round: context, executed action and its reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub round: u64,
    pub time_s: f64,
    pub context: Vec<f64>,
    pub action: ScalingAction,
    pub reward: f64,
    pub source: ActionSource,
}

/// Positive-only experience store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperienceBuffer {
    items: Vec<Experience>,
    r_min: f64,
    rejected: u64,
    stats: RunningStats,
    sigma: Option<f64>,
    sigma_len: usize,
}

impl Default for ExperienceBuffer {
    fn default() -> Self {
        Self::new(0.0)
    }
}

/// Selection result: experiences in prompt order (reward ascending) plus their scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub experiences: Vec<Experience>,
    /// Buffer indices in the same order as `experiences`.
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
    pub sigma: f64,
}

impl ExperienceBuffer {
    pub fn new(r_min: f64) -> Self {
        Self { items: Vec::new(), r_min, rejected: 0, stats: RunningStats::default(), sigma: None, sigma_len: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Experience] {
        &self.items
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn rejected(&self) -> u64 {
        self.rejected
    }

    /// Fraction of offered episodes that were filtered out.
    pub fn rejection_rate(&self) -> f64 {
        let offered = self.rejected + self.items.len() as u64;
        if offered == 0 {
            0.0
        } else {
            self.rejected as f64 / offered as f64
        }
    }

    /// Stores the experience if its reward exceeds `r_min`. Returns whether it was kept.
    pub fn store(&mut self, e: Experience) -> Result<bool> {
        if !(e.reward > self.r_min) {
            self.rejected += 1;
            return Ok(false);
        }
        if let Some(d) = self.stats.dim() {
            if d != e.context.len() {
                return Err(SairError::DimensionMismatch { expected: d, got: e.context.len() });
            }
        }
        self.stats.push(&e.context)?;
        self.items.push(e);
        if self.items.len() <= SIGMA_REFRESH || self.items.len() - self.sigma_len >= SIGMA_REFRESH {
            self.refresh_sigma();
        }
        Ok(true)
    }

    fn refresh_sigma(&mut self) {
        let z: Vec<Vec<f64>> = self.items.iter().map(|e| self.stats.standardize(&e.context)).collect();
        self.sigma = median_pairwise_distance(&z);
        self.sigma_len = self.items.len();
    }

    /// Bandwidth in standardized units: configured value, else the cached median
    /// pairwise distance.
    pub fn sigma(&self, cfg: &SelectionConfig<f64>) -> f64 {
        cfg.sigma.or(self.sigma).unwrap_or(FALLBACK_SIGMA)
    }

    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        self.stats.standardize(x)
    }

    /// Kernel similarity of every stored context to `x`.
    pub fn similarities(&self, x: &[f64], sigma: f64) -> Result<Vec<f64>> {
        let zx = self.standardize(x);
        self.items.iter().map(|e| similarity(&self.standardize(&e.context), &zx, sigma)).collect()
    }

    /// Surprisal score of each stored experience relative to the current context.
    pub fn scores(&self, x: &[f64], cfg: &SelectionConfig<f64>) -> Result<Vec<f64>> {
        let sigma = self.sigma(cfg);
        let sims = self.similarities(x, sigma)?;
        let rewards: Vec<f64> = self.items.iter().map(|e| e.reward).collect();
        if cfg.local_baseline {
            let z: Vec<Vec<f64>> = self.items.iter().map(|e| self.standardize(&e.context)).collect();
            (0..self.items.len())
                .map(|i| {
                    let w = z.iter().map(|zj| similarity(&z[i], zj, sigma)).collect::<Result<Vec<_>>>()?;
                    Ok(surprisal(sims[i], rewards[i], local_loo_mean(&rewards, &w, i)))
                })
                .collect()
        } else {
            Ok(loo_means(&rewards).into_iter().enumerate().map(|(i, b)| surprisal(sims[i], rewards[i], b)).collect())
        }
    }

    /// Greedy selection of up to `M` experiences for the current context, returned in
    /// ascending reward order (ties by round). An empty buffer yields an empty selection.
    pub fn select(&self, x: &[f64], cfg: &SelectionConfig<f64>) -> Result<Selection> {
        cfg.validate()?;
        let sigma = self.sigma(cfg);
        if self.items.is_empty() {
            return Ok(Selection { experiences: Vec::new(), indices: Vec::new(), scores: Vec::new(), sigma });
        }
        let scores = self.scores(x, cfg)?;
        let z: Vec<Vec<f64>> = self.items.iter().map(|e| self.standardize(&e.context)).collect();
        let n = z.len();
        let mut sim = vec![vec![0.0; n]; n];
        for i in 0..n {
            sim[i][i] = 1.0;
            for j in 0..i {
                let s = similarity(&z[i], &z[j], sigma)?;
                sim[i][j] = s;
                sim[j][i] = s;
            }
        }
        let rounds: Vec<u64> = self.items.iter().map(|e| e.round).collect();
        let mut picked = greedy_select(&scores, &sim, cfg.m, cfg.lambda_div, &rounds);
        picked.sort_by(|&a, &b| {
            self.items[a].reward.total_cmp(&self.items[b].reward).then(self.items[a].round.cmp(&self.items[b].round))
        });
        Ok(Selection {
            experiences: picked.iter().map(|&i| self.items[i].clone()).collect(),
            scores: picked.iter().map(|&i| scores[i]).collect(),
            indices: picked,
            sigma,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn exp(round: u64, context: Vec<f64>, reward: f64) -> Experience {
        Experience { round, time_s: round as f64 * 30.0, context, action: ScalingAction::noop(1), reward, source: ActionSource::Mock }
    }

    #[test]
    fn positive_only() {
        let mut b = ExperienceBuffer::new(0.0);
        assert!(b.store(exp(0, vec![1.0], 0.5)).unwrap());
        assert!(!b.store(exp(1, vec![1.0], -0.2)).unwrap());
        assert!(!b.store(exp(2, vec![1.0], 0.0)).unwrap());
        assert_eq!((b.len(), b.rejected()), (1, 2));
        assert!(b.items().iter().all(|e| e.reward > b.r_min()));
        assert!(b.store(exp(3, vec![1.0, 2.0], 0.5)).is_err());
    }

    #[test]
    fn thirty_percent_filter_rate() {
        let mut b = ExperienceBuffer::new(0.0);
        for i in 0..100u64 {
            let r = if i % 10 < 3 { -0.1 } else { 0.4 };
            b.store(exp(i, vec![i as f64], r)).unwrap();
        }
        assert_eq!(b.len(), 70);
        assert!((b.rejection_rate() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn zero_surprise_for_equal_rewards() {
        let mut b = ExperienceBuffer::new(0.0);
        for i in 0..3 {
            b.store(exp(i, vec![0.0, 1.0], 0.5)).unwrap();
        }
        let s = b.scores(&[0.0, 1.0], &SelectionConfig::default()).unwrap();
        assert!(s.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn single_element_surprise_is_reward() {
        let mut b = ExperienceBuffer::new(0.0);
        b.store(exp(0, vec![2.0], 0.7)).unwrap();
        let s = b.scores(&[2.0], &SelectionConfig::default()).unwrap();
        assert!((s[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn selection_sorted_by_reward_and_bounded() {
        let mut b = ExperienceBuffer::new(0.0);
        for (i, r) in [0.9, 0.3, 0.6, 1.4, 0.2].iter().enumerate() {
            b.store(exp(i as u64, vec![i as f64, (i * i) as f64], *r)).unwrap();
        }
        let sel = b.select(&[1.0, 1.0], &SelectionConfig { m: 3, ..Default::default() }).unwrap();
        assert_eq!(sel.experiences.len(), 3);
        assert!(sel.experiences.windows(2).all(|w| w[0].reward <= w[1].reward));
        let empty = ExperienceBuffer::default().select(&[1.0], &SelectionConfig::default()).unwrap();
        assert!(empty.experiences.is_empty());
    }

    #[test]
    fn sigma_tracks_median_distance() {
        let mut b = ExperienceBuffer::new(0.0);
        assert_eq!(b.sigma(&SelectionConfig::default()), FALLBACK_SIGMA);
        for i in 0..10 {
            b.store(exp(i, vec![i as f64], 0.5)).unwrap();
        }
        let s = b.sigma(&SelectionConfig::default());
        assert!(s > 0.0 && s != FALLBACK_SIGMA);
        assert_eq!(b.sigma(&SelectionConfig { sigma: Some(2.5), ..Default::default() }), 2.5);
    }
}
