//! Leave-one-out surprisal and its information-gain counterpart.

use crate::scalar::Scalar;

/// Mean reward of the buffer without each element. A single-element buffer has an empty
/// complement whose mean is taken as 0.
pub fn loo_means<T: Scalar>(rewards: &[T]) -> Vec<T> {
    let n = rewards.len();
    if n == 1 {
        return vec![T::zero()];
    }
    let total = rewards.iter().fold(T::zero(), |a, r| a + *r);
    let denom = T::from_usize(n.saturating_sub(1)).expect("buffer size");
    rewards.iter().map(|r| (total - *r) / denom).collect()
}

/// Similarity-weighted mean of the other rewards, where `weights[j]` is the kernel value
/// between element `e` and element `j`. Falls back to the plain leave-one-out mean when
/// the other weights vanish.
pub fn local_loo_mean<T: Scalar>(rewards: &[T], weights: &[T], e: usize) -> T {
    let mut num = T::zero();
    let mut den = T::zero();
    for (j, (r, w)) in rewards.iter().zip(weights).enumerate() {
        if j != e {
            num = num + *r * *w;
            den = den + *w;
        }
    }
    if den > T::lit(1e-12) {
        num / den
    } else {
        loo_means(rewards).get(e).copied().unwrap_or(T::zero())
    }
}

/// `sim * |r_e - baseline|`.
pub fn surprisal<T: Scalar>(sim: T, reward: T, baseline: T) -> T {
    sim * (reward - baseline).abs()
}

/// Gaussian prior over the mean reward of a context region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPrior<T> {
    pub mean: T,
    pub var: T,
}

/// Conjugate posterior `(mean, var)` of the mean reward after observing `rewards`, each
/// with observation noise variance `noise_var`.
pub fn posterior<T: Scalar>(prior: GaussianPrior<T>, noise_var: T, rewards: &[T]) -> (T, T) {
    let n = T::from_usize(rewards.len()).expect("count");
    let sum = rewards.iter().fold(T::zero(), |a, r| a + *r);
    let precision = T::one() / prior.var + n / noise_var;
    let var = T::one() / precision;
    let mean = var * (prior.mean / prior.var + sum / noise_var);
    (mean, var)
}

/// `KL(N(m1, v1) || N(m0, v0))`.
pub fn gaussian_kl<T: Scalar>(m1: T, v1: T, m0: T, v0: T) -> T {
    let half = T::lit(0.5);
    half * ((v1 + (m1 - m0) * (m1 - m0)) / v0 - T::one() + (v0 / v1).ln())
}

/// Information gained about the mean reward by adding `r_e` to `others`: the KL
/// divergence from the posterior without `e` to the posterior with it.
pub fn information_gain<T: Scalar>(prior: GaussianPrior<T>, noise_var: T, others: &[T], r_e: T) -> T {
    let (m0, v0) = posterior(prior, noise_var, others);
    let mut with = others.to_vec();
    with.push(r_e);
    let (m1, v1) = posterior(prior, noise_var, &with);
    gaussian_kl(m1, v1, m0, v0)
}
