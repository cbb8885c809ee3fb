//! Adaptive traffic-signal control with asynchronous advantage actor-critic.
//!
//! The crate bundles a seedable point-queue traffic simulator, observation
//! encoders, density-based rewards, a small policy/value network stack with
//! hand-written backpropagation, the A3C training engine, fixed-time
//! baselines and an experiment harness.

pub mod sim;
pub mod encoding;
pub mod rewards;
pub mod nn;
pub mod a3c;
pub mod baselines;
pub mod harness;
