use std::sync::atomic::{AtomicBool, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::env::{Decision, EnvEvent, Environment};
use super::loss::{actor_critic_loss, compute_returns_advantages};
use super::store::SharedParameterStore;
use super::{action_to_plan, A3cError, GreenPlan, TrainConfig};
use crate::nn::gradcheck::SequenceLoss;
use crate::nn::{sample_action, PolicyValueNet, RecurrentState};
use crate::sim::arrivals::splitmix64;
use crate::sim::MetricsSample;

/// One gradient submission.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpdateRecord {
    pub worker: usize,
    pub agent: String,
    /// Index of this update among the worker's own submissions.
    pub update: u64,
    /// Store update count after this submission.
    pub store_update: u64,
    pub steps: usize,
    /// Simulation seconds since training started, in the worker's environment.
    pub t: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    /// Mean per-step policy entropy.
    pub entropy: f64,
    pub mean_reward: f64,
    pub grad_norm: f64,
}

pub const UPDATE_COLUMNS: [&str; 11] = [
    "worker",
    "agent",
    "update",
    "store_update",
    "steps",
    "t_sec",
    "policy_loss",
    "value_loss",
    "entropy",
    "mean_reward",
    "grad_norm",
];

impl UpdateRecord {
    pub fn csv_fields(&self) -> Vec<String> {
        use crate::sim::metrics::fmt_num;
        vec![
            self.worker.to_string(),
            self.agent.clone(),
            self.update.to_string(),
            self.store_update.to_string(),
            self.steps.to_string(),
            fmt_num(self.t),
            fmt_num(self.policy_loss),
            fmt_num(self.value_loss),
            fmt_num(self.entropy),
            fmt_num(self.mean_reward),
            fmt_num(self.grad_norm),
        ]
    }
}

/// The learner attached to one agent of an environment.
#[derive(Debug, Clone)]
pub struct Worker {
    pub id: usize,
    pub label: String,
    /// Index of the store this worker reads from and submits to.
    pub store: usize,
    net: PolicyValueNet,
    rng: ChaCha8Rng,
    state: RecurrentState,
    segment_start: RecurrentState,
    observations: Vec<Vec<f64>>,
    actions: Vec<[usize; 4]>,
    values: Vec<f64>,
    rewards: Vec<f64>,
    awaiting_reward: bool,
    epochs: u64,
    updates: u64,
}

impl Worker {
    pub fn new(id: usize, label: String, store_ix: usize, store: &SharedParameterStore, template: &PolicyValueNet, seed: u64) -> Result<Self, A3cError> {
        let mut net = template.clone();
        net.set_params(store.snapshot().0)?;
        let state = net.initial_state();
        Ok(Self {
            id,
            label,
            store: store_ix,
            rng: ChaCha8Rng::seed_from_u64(seed),
            segment_start: state.clone(),
            state,
            net,
            observations: Vec::new(),
            actions: Vec::new(),
            values: Vec::new(),
            rewards: Vec::new(),
            awaiting_reward: false,
            epochs: 0,
            updates: 0,
        })
    }

    pub fn epochs(&self) -> u64 {
        self.epochs
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn finished(&self, cfg: &TrainConfig) -> bool {
        self.epochs >= cfg.total_epochs
    }

    fn take_reward(&mut self, d: &Decision) -> Result<(), A3cError> {
        if self.awaiting_reward {
            let r = d.reward.ok_or_else(|| A3cError::Env(format!("agent '{}' got no reward for its action", self.label)))?;
            self.rewards.push(r);
            self.awaiting_reward = false;
        }
        Ok(())
    }

    /// Handles one decision: records the previous reward, updates when the
    /// segment is full, then samples the next action.
    pub fn decide(&mut self, d: &Decision, store: &SharedParameterStore, cfg: &TrainConfig, t: f64) -> Result<(GreenPlan, Option<UpdateRecord>), A3cError> {
        self.take_reward(d)?;
        let mut record = None;
        let full = self.observations.len() >= cfg.t_max;
        if !self.observations.is_empty() && (full || self.finished(cfg)) {
            let (boot, _) = self.net.step(&d.observation, &self.state)?;
            record = Some(self.update(boot.value, store, cfg, t)?);
        }
        let (out, next) = self.net.step(&d.observation, &self.state)?;
        let sample = sample_action(&out.logits, &mut self.rng);
        if !self.finished(cfg) {
            self.observations.push(d.observation.clone());
            self.actions.push(sample.indices);
            self.values.push(out.value);
            self.awaiting_reward = true;
            self.epochs += 1;
        }
        self.state = next;
        if self.observations.is_empty() {
            self.segment_start = self.state.clone();
        }
        Ok((action_to_plan(&sample.indices)?, record))
    }

    /// Handles the end of an episode: final reward, bootstrapped update and a
    /// fresh recurrent state.
    pub fn end_episode(&mut self, d: Option<&Decision>, store: &SharedParameterStore, cfg: &TrainConfig, t: f64) -> Result<Option<UpdateRecord>, A3cError> {
        let mut record = None;
        if let Some(d) = d {
            self.take_reward(d)?;
            if !self.observations.is_empty() {
                let (boot, _) = self.net.step(&d.observation, &self.state)?;
                record = Some(self.update(boot.value, store, cfg, t)?);
            }
        }
        self.observations.clear();
        self.actions.clear();
        self.values.clear();
        self.rewards.clear();
        self.awaiting_reward = false;
        self.state = self.net.initial_state();
        self.segment_start = self.state.clone();
        Ok(record)
    }

    fn update(&mut self, bootstrap: f64, store: &SharedParameterStore, cfg: &TrainConfig, t: f64) -> Result<UpdateRecord, A3cError> {
        let (returns, advantages) = compute_returns_advantages(&self.rewards, &self.values, cfg.gamma, bootstrap)?;
        let steps = self.rewards.len();
        let mean_reward = self.rewards.iter().sum::<f64>() / steps as f64;
        let loss = actor_critic_loss(
            std::mem::take(&mut self.actions),
            returns,
            advantages,
            cfg.value_coeff,
            cfg.entropy_coeff,
        )?;
        let tape = self.net.forward_sequence(&self.observations, &self.segment_start)?;
        let parts = loss.breakdown(&tape.outputs);
        let mut grads = self.net.backward(&tape, &loss.output_grads(&tape.outputs))?;
        let grad_norm = grads.clip_global_norm(cfg.grad_clip_norm);
        let store_update = store.apply(self.id, &grads)?;
        self.net.set_params(store.snapshot().0)?;
        self.observations.clear();
        self.values.clear();
        self.rewards.clear();
        self.segment_start = self.state.clone();
        let record = UpdateRecord {
            worker: self.id,
            agent: self.label.clone(),
            update: self.updates,
            store_update,
            steps,
            t,
            policy_loss: parts.policy_loss,
            value_loss: parts.value_loss,
            entropy: parts.entropy / steps as f64,
            mean_reward,
            grad_norm,
        };
        self.updates += 1;
        Ok(record)
    }
}

/// Called after every update; returning `false` stops all workers.
pub type UpdateHook<'a> = dyn Fn(&UpdateRecord, &SharedParameterStore) -> bool + Sync + 'a;

/// What one environment instance produced.
#[derive(Debug, Clone, Default)]
pub struct GroupOutcome {
    pub records: Vec<UpdateRecord>,
    /// Training-time traffic metrics, time-shifted so episodes follow each other.
    pub metrics: Vec<MetricsSample>,
    pub plans_emitted: u64,
    pub plan_violations: u64,
    pub episodes: u64,
}

/// Seed of episode `episode` in environment instance `replica`.
pub fn episode_seed(run_seed: u64, replica: usize, episode: u64) -> u64 {
    splitmix64(splitmix64(run_seed ^ 0x5eed_0000_0000_0000 ^ replica as u64).wrapping_add(episode))
}

/// Runs one environment with one worker per agent until every worker has
/// used its epoch budget, the hook asks to stop, or `stop` is raised.
pub fn run_group<E: Environment>(
    replica: usize,
    env: &mut E,
    workers: &mut [Worker],
    stores: &[SharedParameterStore],
    cfg: &TrainConfig,
    hook: Option<&UpdateHook<'_>>,
    stop: &AtomicBool,
) -> Result<GroupOutcome, A3cError> {
    if workers.len() != env.num_agents() {
        return Err(A3cError::Config(format!("{} workers for {} agents", workers.len(), env.num_agents())));
    }
    let mut out = GroupOutcome::default();
    let mut offset = 0.0;
    let push = |out: &mut GroupOutcome, r: UpdateRecord, store: &SharedParameterStore| {
        if let Some(h) = hook {
            if !h(&r, store) {
                stop.store(true, Ordering::SeqCst);
            }
        }
        out.records.push(r);
    };
    'episodes: loop {
        env.reset(episode_seed(cfg.seed, replica, out.episodes))?;
        loop {
            if stop.load(Ordering::SeqCst) {
                break 'episodes;
            }
            match env.poll()? {
                EnvEvent::Decide(ds) => {
                    let t = offset + env.clock();
                    for d in &ds {
                        let w = &mut workers[d.agent];
                        let (plan, rec) = w.decide(d, &stores[w.store], cfg, t)?;
                        if let Some(r) = rec {
                            push(&mut out, r, &stores[w.store]);
                        }
                        env.act(d.agent, plan)?;
                    }
                    if workers.iter().all(|w| w.finished(cfg) && w.observations.is_empty()) {
                        break 'episodes;
                    }
                }
                EnvEvent::Done(ds) => {
                    let t = offset + env.clock();
                    for (a, w) in workers.iter_mut().enumerate() {
                        let d = ds.iter().find(|d| d.agent == a);
                        if let Some(r) = w.end_episode(d, &stores[w.store], cfg, t)? {
                            push(&mut out, r, &stores[w.store]);
                        }
                    }
                    out.metrics.extend(shifted(env.episode_metrics(), offset));
                    offset += env.clock();
                    out.episodes += 1;
                    if workers.iter().all(|w| w.finished(cfg)) {
                        break 'episodes;
                    }
                    continue 'episodes;
                }
            }
        }
    }
    let (emitted, violations) = env.plan_stats();
    out.plans_emitted = emitted;
    out.plan_violations = violations;
    Ok(out)
}

fn shifted(samples: Vec<MetricsSample>, offset: f64) -> impl Iterator<Item = MetricsSample> {
    samples.into_iter().map(move |mut s| {
        s.t += offset;
        s
    })
}
