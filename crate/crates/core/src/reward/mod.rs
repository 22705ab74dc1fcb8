//! Pareto frontier bookkeeping and the shaped reward.

pub mod frontier;
pub mod shaping;

pub use frontier::{dominates, hypervolume, FrontierUpdate, ParetoFrontier};
pub use shaping::{compute_reward, sla_penalty, ActionMagnitude, Observation, RewardBreakdown, RewardConfig};
