//! Density-based rewards.
//!
//! A reward compares an aggregate of the four approach densities at the start
//! and end of a decision epoch and is clipped to its sign. In coordinated
//! multi-agent runs the clipped individual reward is fused with the mean of
//! all agents' clipped rewards.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("snapshot timestamps must increase: before {before}, after {after}")]
    NonIncreasingTime { before: f64, after: f64 },
    #[error("expected {expected} rewards, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("clipped reward must be -1, 0 or +1, got {0}")]
    NotClipped(f64),
    #[error("density must be non-negative, got {0}")]
    NegativeDensity(f64),
}

/// Raw approach densities (veh/km) at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensitySnapshot {
    pub values: [f64; 4],
    pub t: f64,
}

impl DensitySnapshot {
    pub fn new(values: [f64; 4], t: f64) -> Result<Self, RewardError> {
        if let Some(&bad) = values.iter().find(|&&v| !(v >= 0.0)) {
            return Err(RewardError::NegativeDensity(bad));
        }
        Ok(Self { values, t })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardValue {
    pub raw: f64,
    pub clipped: f64,
}

impl RewardValue {
    pub fn from_raw(raw: f64) -> Self {
        Self { raw, clipped: clip(raw) }
    }
}

/// Sign with sign(0) = 0.
pub fn clip(raw: f64) -> f64 {
    if raw > 0.0 {
        1.0
    } else if raw < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    Product,
    Sum,
    SumSquares,
}

impl Aggregate {
    pub fn apply(&self, s: &DensitySnapshot) -> f64 {
        match self {
            Aggregate::Product => density_product(s),
            Aggregate::Sum => density_sum(s),
            Aggregate::SumSquares => density_sum_squares(s),
        }
    }
}

pub fn density_product(s: &DensitySnapshot) -> f64 {
    s.values.iter().product()
}

pub fn density_sum(s: &DensitySnapshot) -> f64 {
    s.values.iter().sum()
}

pub fn density_sum_squares(s: &DensitySnapshot) -> f64 {
    s.values.iter().map(|v| v * v).sum()
}

/// `aggregate(before) - aggregate(after)`, clipped.
pub fn step_reward(
    before: &DensitySnapshot,
    after: &DensitySnapshot,
    aggregate: Aggregate,
) -> Result<RewardValue, RewardError> {
    if !(before.t < after.t) {
        return Err(RewardError::NonIncreasingTime { before: before.t, after: after.t });
    }
    Ok(RewardValue::from_raw(aggregate.apply(before) - aggregate.apply(after)))
}

/// Mean of the agents' clipped rewards.
pub fn global_reward(individual: &[f64], agents: usize) -> Result<f64, RewardError> {
    if agents == 0 || individual.len() != agents {
        return Err(RewardError::Arity { expected: agents, got: individual.len() });
    }
    check_clipped(individual)?;
    Ok(individual.iter().sum::<f64>() / agents as f64)
}

pub const DEFAULT_GLOBAL_WEIGHT: f64 = 0.5;

/// `weight * global + (1 - weight) * individual`, clipped. The default weight 0.5
/// is the plain average of the two.
pub fn combined_reward(global: f64, individual: f64, weight: f64) -> Result<RewardValue, RewardError> {
    check_clipped(&[individual])?;
    Ok(RewardValue::from_raw(weight * global + (1.0 - weight) * individual))
}

fn check_clipped(values: &[f64]) -> Result<(), RewardError> {
    match values.iter().find(|&&r| r != -1.0 && r != 0.0 && r != 1.0) {
        Some(&bad) => Err(RewardError::NotClipped(bad)),
        None => Ok(()),
    }
}

/// Reward settings from the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub aggregate: Aggregate,
    pub global_fusion: Fusion,
    pub global_weight: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { aggregate: Aggregate::Product, global_fusion: Fusion::Off, global_weight: DEFAULT_GLOBAL_WEIGHT }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    #[default]
    Off,
    On,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(v: [f64; 4], t: f64) -> DensitySnapshot {
        DensitySnapshot::new(v, t).unwrap()
    }

    #[test]
    fn aggregates() {
        let ones = snap([1.0; 4], 0.0);
        let s = snap([2.0, 3.0, 4.0, 5.0], 0.0);
        assert_eq!(density_product(&ones), 1.0);
        assert_eq!(density_product(&snap([0.5, 1.0, 1.0, 1.0], 0.0)), 0.5);
        assert_eq!(density_product(&s), 120.0);
        assert_eq!(density_sum(&ones), 4.0);
        assert_eq!(density_sum(&snap([0.0; 4], 0.0)), 0.0);
        assert_eq!(density_sum(&s), 14.0);
        assert_eq!(density_sum_squares(&ones), 4.0);
        assert_eq!(density_sum_squares(&s), 54.0);
        assert_eq!(density_sum_squares(&snap([0.0; 4], 0.0)), 0.0);
    }

    #[test]
    fn differenced_rewards() {
        let r = step_reward(&snap([1.0; 4], 0.0), &snap([0.5, 1.0, 1.0, 1.0], 1.0), Aggregate::Product).unwrap();
        assert_eq!((r.raw, r.clipped), (0.5, 1.0));
        let r = step_reward(&snap([1.0; 4], 0.0), &snap([1.0, 1.0, 1.0, 2.0], 1.0), Aggregate::Sum).unwrap();
        assert_eq!((r.raw, r.clipped), (-1.0, -1.0));
        for agg in [Aggregate::Product, Aggregate::Sum, Aggregate::SumSquares] {
            let r = step_reward(&snap([3.0; 4], 0.0), &snap([3.0; 4], 5.0), agg).unwrap();
            assert_eq!((r.raw, r.clipped), (0.0, 0.0));
        }
        assert!(step_reward(&snap([1.0; 4], 2.0), &snap([1.0; 4], 2.0), Aggregate::Sum).is_err());
    }

    #[test]
    fn fusion() {
        assert_eq!(global_reward(&[1.0; 4], 4).unwrap(), 1.0);
        assert_eq!(global_reward(&[1.0, -1.0, 1.0, 1.0], 4).unwrap(), 0.5);
        assert_eq!(global_reward(&[-1.0, -1.0, 1.0, 1.0], 4).unwrap(), 0.0);
        assert!(matches!(global_reward(&[1.0; 3], 4), Err(RewardError::Arity { .. })));
        assert!(matches!(global_reward(&[0.5, 1.0, 1.0, 1.0], 4), Err(RewardError::NotClipped(_))));

        let r = combined_reward(0.5, -1.0, 0.5).unwrap();
        assert_eq!((r.raw, r.clipped), (-0.25, -1.0));
        let r = combined_reward(1.0, 1.0, 0.5).unwrap();
        assert_eq!((r.raw, r.clipped), (1.0, 1.0));
        let r = combined_reward(-0.5, 1.0, 0.5).unwrap();
        assert_eq!((r.raw, r.clipped), (0.25, 1.0));
        assert!(combined_reward(0.0, 0.3, 0.5).is_err());
    }
}
