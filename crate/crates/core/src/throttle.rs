//! Token-bucket GPU rate control.
//!
//! Each refill window grants `t_max * rate_ratio` tokens. Kernel launches consume tokens
//! equal to their grid size; launches that do not fit wait in a FIFO queue and are admitted
//! at later refills. Unused tokens do not carry over into the next window.

use std::collections::VecDeque;

use crate::error::{Result, SairError};
use crate::scalar::Scalar;

/// Refill window length in milliseconds.
pub const WINDOW_MS: f64 = 10.0;
/// Default tokens granted per window at full rate.
pub const DEFAULT_T_MAX: f64 = 1000.0;
/// Lowest admissible GPU rate ratio.
pub const RHO_MIN: f64 = 0.1;

pub type LaunchId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaunchOutcome {
    Admitted,
    Blocked,
    /// The kernel is larger than a full-rate window. It is queued and admitted piecewise
    /// across several windows.
    Oversized,
}

#[derive(Debug, Clone)]
struct BlockedLaunch<T> {
    id: LaunchId,
    size: T,
    remaining: T,
}

/// Result of one window refill.
#[derive(Debug, Clone, PartialEq)]
pub struct Refill<T> {
    pub granted: T,
    /// Launches that became fully admitted, in admission order.
    pub admitted: Vec<LaunchId>,
    /// Work units admitted out of the blocked queue (including partial progress).
    pub admitted_work: T,
}

#[derive(Debug, Clone)]
pub struct TokenBucket<T: Scalar = f64> {
    rate_ratio: T,
    pending_rate: Option<T>,
    rate_min: T,
    t_max: T,
    tokens: T,
    blocked: VecDeque<BlockedLaunch<T>>,
    next_id: LaunchId,
    granted_total: T,
    admitted_total: T,
    windows: u64,
}

impl<T: Scalar> TokenBucket<T> {
    /// Creates a bucket whose first window is already granted.
    pub fn new(t_max: T, rate_ratio: T) -> Result<Self> {
        if !(t_max > T::zero()) {
            return Err(SairError::Config(format!("t_max must be positive, got {t_max}")));
        }
        let rate_min = T::lit(RHO_MIN);
        check_rate(rate_ratio, rate_min)?;
        let grant = t_max * rate_ratio;
        Ok(Self {
            rate_ratio,
            pending_rate: None,
            rate_min,
            t_max,
            tokens: grant,
            blocked: VecDeque::new(),
            next_id: 0,
            granted_total: grant,
            admitted_total: T::zero(),
            windows: 1,
        })
    }

    pub fn with_defaults(rate_ratio: T) -> Result<Self> {
        Self::new(T::lit(DEFAULT_T_MAX), rate_ratio)
    }

    pub fn rate_ratio(&self) -> T {
        self.rate_ratio
    }

    pub fn t_max(&self) -> T {
        self.t_max
    }

    pub fn tokens(&self) -> T {
        self.tokens
    }

    pub fn blocked_len(&self) -> usize {
        self.blocked.len()
    }

    /// Work units still waiting in the blocked queue.
    pub fn blocked_work(&self) -> T {
        self.blocked.iter().fold(T::zero(), |acc, b| acc + b.remaining)
    }

    pub fn granted_total(&self) -> T {
        self.granted_total
    }

    pub fn admitted_total(&self) -> T {
        self.admitted_total
    }

    pub fn windows(&self) -> u64 {
        self.windows
    }

    /// Starts a new window: applies a pending rate change, resets the balance to the grant
    /// and admits blocked work in FIFO order.
    pub fn refill(&mut self) -> Refill<T> {
        if let Some(rate) = self.pending_rate.take() {
            self.rate_ratio = rate;
        }
        let grant = (self.t_max * self.rate_ratio).min(self.t_max);
        self.tokens = grant;
        self.granted_total = self.granted_total + grant;
        self.windows += 1;

        let mut admitted = Vec::new();
        let mut admitted_work = T::zero();
        while let Some(head) = self.blocked.front_mut() {
            if head.remaining <= self.tokens {
                self.tokens = self.tokens - head.remaining;
                admitted_work = admitted_work + head.remaining;
                admitted.push(head.id);
                self.blocked.pop_front();
            } else if head.size > grant {
                // Can never fit in one window at this rate: make partial progress.
                head.remaining = head.remaining - self.tokens;
                admitted_work = admitted_work + self.tokens;
                self.tokens = T::zero();
                break;
            } else {
                break;
            }
        }
        self.admitted_total = self.admitted_total + admitted_work;
        Refill { granted: grant, admitted, admitted_work }
    }

    /// Attempts to launch a kernel of `grid_blocks` work units.
    ///
    /// Launches never overtake blocked work: if anything is queued the new launch queues
    /// behind it even when the balance would cover it.
    pub fn try_launch(&mut self, grid_blocks: T) -> Result<(LaunchId, LaunchOutcome)> {
        if !(grid_blocks > T::zero()) {
            return Err(SairError::Config(format!(
                "grid_blocks must be positive, got {grid_blocks}"
            )));
        }
        let id = self.next_id;
        self.next_id += 1;
        if self.blocked.is_empty() && grid_blocks <= self.tokens {
            self.tokens = self.tokens - grid_blocks;
            self.admitted_total = self.admitted_total + grid_blocks;
            return Ok((id, LaunchOutcome::Admitted));
        }
        self.blocked.push_back(BlockedLaunch { id, size: grid_blocks, remaining: grid_blocks });
        let outcome = if grid_blocks > self.t_max {
            LaunchOutcome::Oversized
        } else {
            LaunchOutcome::Blocked
        };
        Ok((id, outcome))
    }

    /// Schedules a new rate ratio. It takes effect at the next refill.
    pub fn set_rate(&mut self, rate_ratio: T) -> Result<()> {
        check_rate(rate_ratio, self.rate_min)?;
        self.pending_rate = Some(rate_ratio);
        Ok(())
    }

    /// The rate that the next window will use.
    pub fn effective_next_rate(&self) -> T {
        self.pending_rate.unwrap_or(self.rate_ratio)
    }
}

fn check_rate<T: Scalar>(rate: T, min: T) -> Result<()> {
    if rate >= min && rate <= T::one() {
        Ok(())
    } else {
        Err(SairError::RateOutOfRange { rate: rate.as_f64(), min: min.as_f64() })
    }
}

/// GPU utilization normalized to the configured quota: `min(1, u_actual / rho)`.
pub fn quota_utilization<T: Scalar>(u_actual: T, rate_ratio: T) -> Result<T> {
    let rate_min = T::lit(RHO_MIN);
    if !(rate_ratio >= rate_min) || rate_ratio > T::one() {
        return Err(SairError::RateOutOfRange { rate: rate_ratio.as_f64(), min: RHO_MIN });
    }
    let u = u_actual.max(T::zero());
    Ok((u / rate_ratio).min(T::one()))
}
