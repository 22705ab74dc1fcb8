use serde::{Deserialize, Serialize};

use crate::error::{Result, SairError};

/// Geometrically decaying exploration probability with a floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplorationSchedule {
    pub epsilon: f64,
    pub epsilon0: f64,
    pub decay: f64,
    pub epsilon_min: f64,
}

impl Default for ExplorationSchedule {
    fn default() -> Self {
        Self::new(0.15, 0.95, 0.05)
    }
}

impl ExplorationSchedule {
    pub fn new(epsilon0: f64, decay: f64, epsilon_min: f64) -> Self {
        Self { epsilon: epsilon0, epsilon0, decay, epsilon_min }
    }

    /// Fixed probability that never decays.
    pub fn constant(epsilon: f64) -> Self {
        Self::new(epsilon, 1.0, epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.epsilon_min)
            && self.epsilon_min <= self.epsilon0
            && self.epsilon0 <= 1.0
            && (0.0..=1.0).contains(&self.decay)
            && (self.epsilon_min..=self.epsilon0).contains(&self.epsilon);
        if ok {
            Ok(())
        } else {
            Err(SairError::Config("exploration schedule needs 0 <= eps_min <= eps <= eps0 <= 1, decay in [0, 1]".into()))
        }
    }

    pub fn decay_once(&mut self) {
        self.epsilon = (self.epsilon * self.decay).max(self.epsilon_min);
    }

    /// Number of decays from `epsilon0` until the floor is reached.
    pub fn decays_to_floor(&self) -> Option<u32> {
        if self.epsilon0 <= self.epsilon_min {
            return Some(0);
        }
        if self.decay >= 1.0 || self.decay <= 0.0 {
            return None;
        }
        Some(((self.epsilon_min / self.epsilon0).ln() / self.decay.ln()).ceil() as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_arithmetic() {
        let mut s = ExplorationSchedule::default();
        s.decay_once();
        assert!((s.epsilon - 0.1425).abs() < 1e-12);
        assert_eq!(s.decays_to_floor(), Some(22));

        let mut s = ExplorationSchedule::default();
        for _ in 0..21 {
            s.decay_once();
        }
        assert!(s.epsilon > 0.05);
        s.decay_once();
        assert_eq!(s.epsilon, 0.05);
        s.decay_once();
        assert_eq!(s.epsilon, 0.05);
    }

    #[test]
    fn constant_never_moves() {
        let mut s = ExplorationSchedule::constant(1.0);
        s.decay_once();
        assert_eq!(s.epsilon, 1.0);
        assert!(s.validate().is_ok());
        assert!(ExplorationSchedule::new(0.1, 0.9, 0.2).validate().is_err());
    }
}
