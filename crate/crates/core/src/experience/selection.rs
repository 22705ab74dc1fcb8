//! Diversity-regularized subset selection.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SairError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig<T: Scalar = f64> {
    /// Number of experiences placed in context.
    pub m: usize,
    pub lambda_div: T,
    /// Kernel bandwidth in standardized feature units; the buffer's median pairwise
    /// distance when unset.
    pub sigma: Option<T>,
    /// Use a similarity-weighted leave-one-out mean instead of the global one.
    pub local_baseline: bool,
}

impl<T: Scalar> Default for SelectionConfig<T> {
    fn default() -> Self {
        Self { m: 15, lambda_div: T::lit(0.1), sigma: None, local_baseline: false }
    }
}

impl<T: Scalar> SelectionConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(SairError::Config("context size M must be at least 1".into()));
        }
        if !(self.lambda_div >= T::zero()) {
            return Err(SairError::Config("lambda_div must be non-negative".into()));
        }
        if self.sigma.is_some_and(|s| !(s > T::zero())) {
            return Err(SairError::Config("sigma must be positive".into()));
        }
        Ok(())
    }
}

/// `sum(score) - lambda * sum over unordered pairs of sim`.
pub fn objective<T: Scalar>(selected: &[usize], scores: &[T], sim: &[Vec<T>], lambda: T) -> T {
    let mut value = T::zero();
    for (k, &i) in selected.iter().enumerate() {
        value = value + scores[i];
        for &j in &selected[..k] {
            value = value - lambda * sim[i][j];
        }
    }
    value
}

/// Greedily picks `min(m, n)` items, each step taking the largest marginal gain
/// `score_i - lambda * sum_{j in S} sim(i, j)`. Ties go to the smaller `tie_key`, then the
/// lower index. Returns indices in pick order.
pub fn greedy_select<T: Scalar>(scores: &[T], sim: &[Vec<T>], m: usize, lambda: T, tie_key: &[u64]) -> Vec<usize> {
    let n = scores.len();
    let mut penalty = vec![T::zero(); n];
    let mut taken = vec![false; n];
    let mut out = Vec::with_capacity(m.min(n));
    while out.len() < m.min(n) {
        let mut best: Option<(usize, T)> = None;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            let gain = scores[i] - lambda * penalty[i];
            let better = match best {
                None => true,
                Some((b, g)) => {
                    gain > g || (gain == g && (tie_key.get(i), i) < (tie_key.get(b), b))
                }
            };
            if better {
                best = Some((i, gain));
            }
        }
        let (pick, _) = best.expect("items remain");
        taken[pick] = true;
        out.push(pick);
        for i in 0..n {
            penalty[i] = penalty[i] + sim[i][pick];
        }
    }
    out
}
