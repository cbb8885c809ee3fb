//! Brute-force search over every fixed green plan in the action space.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{evaluate_episode, Controller, EvalOptions, HarnessError};
use crate::a3c::GreenPlan;
use crate::sim::ScenarioConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Every plan with its time-averaged delay, in enumeration order.
    pub evaluations: Vec<(GreenPlan, f64)>,
    pub best: GreenPlan,
    pub best_delay: f64,
}

impl OracleResult {
    /// Delay of `plan`, if it was evaluated.
    pub fn delay_of(&self, plan: &GreenPlan) -> Option<f64> {
        self.evaluations.iter().find(|(p, _)| p == plan).map(|e| e.1)
    }

    /// Share of plans with strictly lower delay than `delay`.
    pub fn rank_fraction(&self, delay: f64) -> f64 {
        let better = self.evaluations.iter().filter(|e| e.1 < delay).count();
        better as f64 / self.evaluations.len() as f64
    }
}

/// Evaluates every plan as a fixed schedule on `seed`. Ties go to the plan
/// that comes first in enumeration order.
pub fn exhaustive_search(scenario: &ScenarioConfig, seed: u64, opts: &EvalOptions) -> Result<OracleResult, HarnessError> {
    let plans: Vec<GreenPlan> = GreenPlan::all().collect();
    let opts = EvalOptions { arrival_digest: false, ..*opts };
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(plans.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<f64>>> = Mutex::new(vec![None; plans.len()]);
    let first_error: Mutex<Option<HarnessError>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= plans.len() {
                    break;
                }
                match evaluate_episode(scenario, &Controller::Fixed(plans[i].to_signal_plan()), seed, &opts) {
                    Ok(r) => results.lock().expect("results lock")[i] = Some(r.avg_delay),
                    Err(e) => {
                        first_error.lock().expect("error lock").get_or_insert(e);
                        next.store(plans.len(), Ordering::Relaxed);
                    }
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().expect("error lock") {
        return Err(e);
    }
    let evaluations: Vec<(GreenPlan, f64)> = plans
        .into_iter()
        .zip(results.into_inner().expect("results lock"))
        .map(|(p, d)| (p, d.expect("every plan evaluated")))
        .collect();
    let (best, best_delay) = evaluations
        .iter()
        .fold(None::<(GreenPlan, f64)>, |acc, &(p, d)| match acc {
            Some((_, bd)) if bd <= d => acc,
            _ => Some((p, d)),
        })
        .expect("plan space is not empty");
    Ok(OracleResult { evaluations, best, best_delay })
}
