//! Asynchronous advantage actor-critic over the traffic simulator.
//!
//! Decisions are taken once per signal cycle: at the end of a cycle an agent
//! observes its intersection, samples four green times and the simulator runs
//! the next cycle under them. Workers roll out up to `t_max` decisions, compute
//! n-step returns and submit clipped gradients to a shared RMSProp store.

pub mod config;
pub mod env;
pub mod loss;
pub mod store;
pub mod train;
pub mod worker;

use thiserror::Error;

use crate::encoding::EncodingError;
use crate::nn::NnError;
use crate::rewards::RewardError;
use crate::sim::{SignalPlan, SimError};

pub use config::{Regime, RunConfig, TrainConfig};
pub use env::{BanditEnv, Decision, EnvEvent, Environment, ObservationKind, TrafficEnv};
pub use loss::{actor_critic_loss, compute_returns_advantages, ActorCriticLoss, LossBreakdown};
pub use store::{RmsProp, SharedParameterStore};
pub use train::{train, TrainOutcome};
pub use worker::{UpdateRecord, Worker};

#[derive(Debug, Error)]
pub enum A3cError {
    #[error("argument error: {0}")]
    Argument(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("environment failure: {0}")]
    Env(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub const MIN_GREEN: u32 = 20;
pub const MAX_GREEN: u32 = 60;
pub const GREEN_STEP: u32 = 5;
pub const CYCLE_THRESHOLD: u32 = 240;

/// True when every green is in {20, 25, ..., 60} and the total is within the threshold.
pub fn plan_is_valid(greens: &[u32; 4]) -> bool {
    greens.iter().all(|&g| (MIN_GREEN..=MAX_GREEN).contains(&g) && (g - MIN_GREEN) % GREEN_STEP == 0)
        && greens.iter().sum::<u32>() <= CYCLE_THRESHOLD
}

/// An RL action: four green durations from the discrete action set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GreenPlan {
    greens: [u32; 4],
}

impl GreenPlan {
    pub fn new(greens: [u32; 4]) -> Result<Self, A3cError> {
        if !plan_is_valid(&greens) {
            return Err(A3cError::Argument(format!("green plan {greens:?} is outside the action set")));
        }
        Ok(Self { greens })
    }

    pub fn greens(&self) -> [u32; 4] {
        self.greens
    }

    pub fn indices(&self) -> [usize; 4] {
        self.greens.map(|g| ((g - MIN_GREEN) / GREEN_STEP) as usize)
    }

    pub fn to_signal_plan(&self) -> SignalPlan {
        SignalPlan { greens: self.greens }
    }

    /// Every plan of the action set, in lexicographic index order.
    pub fn all() -> impl Iterator<Item = GreenPlan> {
        (0..9usize.pow(4)).map(|k| {
            let idx = [k / 729, (k / 81) % 9, (k / 9) % 9, k % 9];
            action_to_plan(&idx).expect("index in range")
        })
    }
}

/// `greens[i] = 20 + 5 * indices[i]`.
pub fn action_to_plan(indices: &[usize; 4]) -> Result<GreenPlan, A3cError> {
    if let Some(&bad) = indices.iter().find(|&&i| i > 8) {
        return Err(A3cError::Argument(format!("action index {bad} out of range 0..8")));
    }
    GreenPlan::new(indices.map(|i| MIN_GREEN + GREEN_STEP * i as u32))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_mapping() {
        assert_eq!(action_to_plan(&[0; 4]).unwrap().greens(), [20; 4]);
        let full = action_to_plan(&[8; 4]).unwrap();
        assert_eq!(full.greens(), [60; 4]);
        assert_eq!(full.greens().iter().sum::<u32>(), CYCLE_THRESHOLD);
        assert_eq!(action_to_plan(&[2, 4, 6, 8]).unwrap().greens(), [30, 40, 50, 60]);
        assert!(action_to_plan(&[9, 0, 0, 0]).is_err());
        assert!(GreenPlan::new([22, 20, 20, 20]).is_err());
        assert!(GreenPlan::new([65, 20, 20, 20]).is_err());
    }

    #[test]
    fn enumeration_covers_the_action_set() {
        let all: Vec<GreenPlan> = GreenPlan::all().collect();
        assert_eq!(all.len(), 6561);
        assert_eq!(all[0].greens(), [20; 4]);
        assert_eq!(all[6560].greens(), [60; 4]);
        for p in &all {
            assert_eq!(action_to_plan(&p.indices()).unwrap(), *p);
        }
    }
}
