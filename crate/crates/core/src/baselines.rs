//! Fixed signal timing: every approach gets the same green, round robin.

use thiserror::Error;

use crate::sim::SignalPlan;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BaselineError {
    #[error("FST period must be positive, got {0}")]
    Period(i64),
}

/// Round-robin controller in the fixed Upper, Right, Lower, Left order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FstController {
    period: u32,
}

impl FstController {
    pub fn new(period: i64) -> Result<Self, BaselineError> {
        if period <= 0 || period > u32::MAX as i64 {
            return Err(BaselineError::Period(period));
        }
        Ok(Self { period: period as u32 })
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    /// The per-cycle schedule. It may exceed the RL action bounds.
    pub fn plan(&self) -> SignalPlan {
        SignalPlan { greens: [self.period; 4] }
    }

    pub fn label(&self) -> String {
        format!("FST{}", self.period)
    }
}

pub fn fst_plan(period: i64) -> Result<SignalPlan, BaselineError> {
    Ok(FstController::new(period)?.plan())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::builtin;
    use crate::sim::{build_network, Network};

    #[test]
    fn schedules() {
        let p = fst_plan(60).unwrap();
        assert_eq!(p.greens, [60; 4]);
        assert_eq!(p.cycle_seconds(0.0), 240.0);
        assert_eq!(fst_plan(120).unwrap().greens, [120; 4]);
        assert_eq!(fst_plan(0), Err(BaselineError::Period(0)));
        assert_eq!(fst_plan(-5), Err(BaselineError::Period(-5)));
    }

    #[test]
    fn round_robin_is_fair_over_whole_cycles() {
        let cfg = builtin("single").unwrap();
        let topo = build_network(&cfg).unwrap();
        for period in [60, 90, 120] {
            let mut net = Network::new(&topo, &cfg.sim, 0).unwrap();
            net.set_plan(0, fst_plan(period).unwrap()).unwrap();
            let mut green = [0u64; 4];
            let mut order = Vec::new();
            for _ in 0..3 * 4 * period {
                // A boundary means the next step opens the first phase.
                let node = net.intersection(0);
                let active = if node.at_cycle_boundary() { Some(0) } else { node.green_approach() };
                if let Some(a) = active {
                    green[a] += 1;
                    if order.last() != Some(&a) {
                        order.push(a);
                    }
                }
                net.step().unwrap();
            }
            assert_eq!(green, [3 * period as u64; 4]);
            assert_eq!(&order[..4], &[0, 1, 2, 3]);
        }
    }
}
