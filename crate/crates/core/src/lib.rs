//! Simulated inference pipeline with an in-context reinforcement learning autoscaler.
//!
//! The reward, retrieval and throttling math is generic over [`Scalar`] (`f32` or
//! `f64`); the aliases below fix it to `f64`, which the simulator and harness use.

pub mod action;
pub mod baselines;
pub mod error;
pub mod experience;
pub mod harness;
pub mod policy;
pub mod reward;
pub mod scalar;
pub mod sim;
pub mod throttle;

pub use error::{Result, SairError};
pub use scalar::Scalar;

pub type Frontier = reward::ParetoFrontier<f64>;
pub type RewardConfig = reward::RewardConfig<f64>;
pub type RewardBreakdown = reward::RewardBreakdown<f64>;
pub type Observation = reward::Observation<f64>;
pub type ActionMagnitude = reward::ActionMagnitude<f64>;
pub type SelectionConfig = experience::SelectionConfig<f64>;
pub type TokenBucket = throttle::TokenBucket<f64>;

pub type Frontier32 = reward::ParetoFrontier<f32>;
pub type RewardConfig32 = reward::RewardConfig<f32>;
pub type TokenBucket32 = throttle::TokenBucket<f32>;
