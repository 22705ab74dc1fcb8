//! Two-objective Pareto frontier over normalized (latency, cost), both minimized.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SairError};
use crate::scalar::Scalar;

/// `p` dominates `q` when it is no worse on both axes and strictly better on one.
pub fn dominates<T: Scalar>(p: [T; 2], q: [T; 2]) -> bool {
    p[0] <= q[0] && p[1] <= q[1] && (p[0] < q[0] || p[1] < q[1])
}

/// Area dominated by a mutually non-dominated set, bounded by the reference point `(1, 1)`.
pub fn hypervolume<T: Scalar>(points: &[[T; 2]]) -> T {
    let mut sorted: Vec<[T; 2]> = points.to_vec();
    sorted.sort_by(|a, b| a[0].partial_cmp(&b[0]).expect("finite").then(b[1].partial_cmp(&a[1]).expect("finite")));
    let mut area = T::zero();
    let mut ceiling = T::one();
    for p in sorted {
        if p[1] < ceiling {
            area = area + (T::one() - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    area
}

/// Outcome of inserting an observation into the frontier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierUpdate<T> {
    pub point: [T; 2],
    /// The raw observation exceeded a normalizer and was clamped to 1 on that axis.
    pub clamped: bool,
    pub inserted: bool,
    pub removed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFrontier<T: Scalar = f64> {
    /// Sorted by latency ascending, hence cost descending.
    points: Vec<[T; 2]>,
    l_max: T,
    c_max: T,
}

impl<T: Scalar> ParetoFrontier<T> {
    pub fn new(l_max: T, c_max: T) -> Result<Self> {
        if !(l_max > T::zero()) || !(c_max > T::zero()) {
            return Err(SairError::Config("frontier normalizers must be positive".into()));
        }
        Ok(Self { points: Vec::new(), l_max, c_max })
    }

    pub fn points(&self) -> &[[T; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn l_max(&self) -> T {
        self.l_max
    }

    pub fn c_max(&self) -> T {
        self.c_max
    }

    /// Maps a raw (latency ms, cost) observation into `[0, 1]^2`.
    pub fn normalize(&self, latency: T, cost: T) -> ([T; 2], bool) {
        let l = (latency / self.l_max).max(T::zero());
        let c = (cost / self.c_max).max(T::zero());
        let clamped = l > T::one() || c > T::one();
        ([l.min(T::one()), c.min(T::one())], clamped)
    }

    pub fn is_dominated(&self, point: [T; 2]) -> bool {
        self.points.iter().any(|&p| dominates(p, point))
    }

    /// Inserts a normalized point if no frontier point dominates it, dropping the points
    /// it dominates. Re-inserting an existing point is a no-op.
    pub fn insert(&mut self, point: [T; 2]) -> (bool, usize) {
        if self.is_dominated(point) || self.points.contains(&point) {
            return (false, 0);
        }
        let before = self.points.len();
        self.points.retain(|&p| !dominates(point, p));
        let removed = before - self.points.len();
        let at = self.points.partition_point(|p| p[0] < point[0]);
        self.points.insert(at, point);
        (true, removed)
    }

    /// Normalizes a raw observation and inserts it.
    pub fn update(&mut self, latency: T, cost: T) -> FrontierUpdate<T> {
        let (point, clamped) = self.normalize(latency, cost);
        if clamped {
            log::debug!("observation ({latency}, {cost}) exceeds frontier normalizers; clamped");
        }
        let (inserted, removed) = self.insert(point);
        FrontierUpdate { point, clamped, inserted, removed }
    }

    pub fn hypervolume(&self) -> T {
        hypervolume(&self.points)
    }

    /// Exclusive hypervolume the point adds: `HV(F + p) - HV(F)`, after removing the
    /// frontier points that `p` dominates.
    pub fn hypervolume_contribution(&self, point: [T; 2]) -> Result<T> {
        if self.is_dominated(point) {
            return Err(SairError::Dominated);
        }
        let mut merged: Vec<[T; 2]> = self.points.iter().copied().filter(|&p| !dominates(point, p)).collect();
        if !merged.contains(&point) {
            merged.push(point);
        }
        Ok((hypervolume(&merged) - self.hypervolume()).max(T::zero()))
    }

    /// Euclidean distance from the point to the nearest frontier point.
    pub fn distance(&self, point: [T; 2]) -> Result<T> {
        self.points
            .iter()
            .map(|p| ((p[0] - point[0]).powi(2) + (p[1] - point[1]).powi(2)).sqrt())
            .fold(None, |acc: Option<T>, d| Some(acc.map_or(d, |a| a.min(d))))
            .ok_or(SairError::EmptyFrontier)
    }

    /// `1 + H(p)` for non-dominated points, `0.8 / (1 + d(p, F))` for dominated ones.
    pub fn pareto_reward(&self, point: [T; 2]) -> T {
        match self.hypervolume_contribution(point) {
            Ok(h) => T::one() + h,
            Err(_) => {
                let d = self.distance(point).expect("dominated implies non-empty");
                T::lit(0.8) / (T::one() + d)
            }
        }
    }
}
