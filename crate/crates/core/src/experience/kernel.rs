//! Feature-space similarity.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SairError};
use crate::scalar::Scalar;

pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(SairError::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + (*x - *y) * (*x - *y)))
}

/// Gaussian kernel `exp(-|a - b|^2 / (2 sigma^2))`.
pub fn similarity<T: Scalar>(a: &[T], b: &[T], sigma: T) -> Result<T> {
    if !(sigma > T::zero()) {
        return Err(SairError::Config(format!("similarity bandwidth must be positive, got {sigma}")));
    }
    let d2 = squared_distance(a, b)?;
    Ok((-d2 / (T::lit(2.0) * sigma * sigma)).exp())
}

/// Median of all pairwise Euclidean distances; `None` with fewer than two points or when
/// every pair coincides.
pub fn median_pairwise_distance<T: Scalar>(points: &[Vec<T>]) -> Option<T> {
    let mut d = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if let Ok(d2) = squared_distance(&points[i], &points[j]) {
                d.push(d2.sqrt());
            }
        }
    }
    if d.is_empty() {
        return None;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite distance"));
    let m = *m;
    (m > T::zero()).then_some(m)
}

/// Per-dimension running mean and variance (Welford).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunningStats {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningStats {
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn dim(&self) -> Option<usize> {
        (self.count > 0).then_some(self.mean.len())
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if self.count == 0 {
            self.mean = vec![0.0; x.len()];
            self.m2 = vec![0.0; x.len()];
        } else if x.len() != self.mean.len() {
            return Err(SairError::DimensionMismatch { expected: self.mean.len(), got: x.len() });
        }
        self.count += 1;
        let n = self.count as f64;
        for (k, &v) in x.iter().enumerate() {
            let delta = v - self.mean[k];
            self.mean[k] += delta / n;
            self.m2[k] += delta * (v - self.mean[k]);
        }
        Ok(())
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population standard deviation per dimension.
    pub fn std(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.m2.iter().map(|m| (m / n).sqrt()).collect()
    }

    /// Z-scores; constant dimensions are centered but not scaled.
    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        if self.count == 0 {
            return x.to_vec();
        }
        let std = self.std();
        x.iter()
            .enumerate()
            .map(|(k, &v)| {
                let mean = self.mean.get(k).copied().unwrap_or(0.0);
                let s = std.get(k).copied().filter(|s| *s > 1e-12).unwrap_or(1.0);
                (v - mean) / s
            })
            .collect()
    }
}
