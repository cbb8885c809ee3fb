//! Controller evaluation on matched seeds, experiments and summaries.

pub mod experiment;
pub mod oracle;
pub mod summary;

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::a3c::env::{EnvEvent, Environment, ObservationKind, TrafficEnv};
use crate::a3c::{action_to_plan, A3cError};
use crate::baselines::{BaselineError, FstController};
use crate::nn::{checkpoint, greedy_action, sample_action, NnError, PolicyValueNet, RecurrentState, Variant};
use crate::rewards::RewardConfig;
use crate::sim::metrics::time_averages;
use crate::sim::{build_network, MetricsSample, ScenarioConfig, SignalPlan, SimError};

pub use experiment::{run_experiment, run_experiment_file, ExperimentReport, ExperimentSpec, RunSpec};
pub use summary::{percent_change, summarize, summarize_dir, SummaryRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error("missing input: {0}")]
    Missing(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("paired-seed check failed: {0}")]
    Pairing(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    A3c(#[from] A3cError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A trained policy applied to some intersections of a scenario.
#[derive(Debug, Clone)]
pub struct PolicyController {
    /// `(intersection id, network)`; several ids may share a network value.
    pub agents: Vec<(String, PolicyValueNet)>,
    pub observation: ObservationKind,
    /// Most probable action instead of sampling.
    pub greedy: bool,
    /// Plan of intersections without an agent.
    pub fallback: SignalPlan,
}

impl PolicyController {
    /// Loads a checkpoint file (applied to every intersection) or a training
    /// output directory (`agent.ckpt`, or `agent_<ID>.ckpt` per intersection).
    pub fn load(path: &Path, scenario: &ScenarioConfig) -> Result<Self, HarnessError> {
        let topo = build_network(scenario)?;
        let ids = topo.intersection_ids();
        let mut agents = Vec::new();
        let dir = if path.is_dir() {
            let shared = path.join("agent.ckpt");
            if shared.is_file() {
                let net = checkpoint::load(&shared)?;
                agents = ids.iter().map(|id| (id.clone(), net.clone())).collect();
            } else {
                for id in &ids {
                    let f = path.join(format!("agent_{id}.ckpt"));
                    if f.is_file() {
                        agents.push((id.clone(), checkpoint::load(&f)?));
                    }
                }
            }
            path.to_path_buf()
        } else if path.is_file() {
            let net = checkpoint::load(path)?;
            agents = ids.iter().map(|id| (id.clone(), net.clone())).collect();
            path.parent().map(Path::to_path_buf).unwrap_or_default()
        } else {
            return Err(HarnessError::Missing(format!("checkpoint {}", path.display())));
        };
        if agents.is_empty() {
            return Err(HarnessError::Missing(format!("no checkpoint for any intersection under {}", path.display())));
        }
        let variant = agents[0].1.config().variant;
        if variant == Variant::Single && agents.len() != 1 {
            return Err(HarnessError::Spec(format!(
                "single-intersection checkpoint {} used on a {}-intersection scenario",
                path.display(),
                agents.len()
            )));
        }
        let observation = match variant {
            Variant::Single => ObservationKind::Single,
            Variant::Multi if manifest_says_isolated(&dir) => ObservationKind::Isolated,
            Variant::Multi => ObservationKind::Neighbors,
        };
        Ok(Self { agents, observation, greedy: true, fallback: SignalPlan::uniform(60)? })
    }
}

fn manifest_says_isolated(dir: &Path) -> bool {
    let Ok(text) = std::fs::read_to_string(dir.join("manifest.json")) else { return false };
    let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) else { return false };
    v.pointer("/ordering/observation").and_then(|o| o.as_str()) == Some("isolated")
}

#[derive(Debug, Clone)]
pub enum Controller {
    Fst(FstController),
    Fixed(SignalPlan),
    Policy(PolicyController),
}

impl Controller {
    pub fn fst(period: i64) -> Result<Self, HarnessError> {
        Ok(Controller::Fst(FstController::new(period)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub window: f64,
    /// Overrides the scenario's episode length.
    pub episode_duration: Option<f64>,
    /// Record arrivals so the paired-seed digest can be computed.
    pub arrival_digest: bool,
    /// Seed of the action sampler when the policy is not greedy.
    pub sample_seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { window: 90.0, episode_duration: None, arrival_digest: true, sample_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub seed: u64,
    pub intersection_ids: Vec<String>,
    pub samples: Vec<MetricsSample>,
    /// Time-averaged network delay, s/km.
    pub avg_delay: f64,
    /// Time-averaged density, veh/km.
    pub avg_density: f64,
    pub arrival_digest: Option<String>,
    pub plans_emitted: u64,
    pub plan_violations: u64,
}

/// Runs one episode of `scenario` under `controller` with arrival seed `seed`.
pub fn evaluate_episode(
    scenario: &ScenarioConfig,
    controller: &Controller,
    seed: u64,
    opts: &EvalOptions,
) -> Result<EpisodeResult, HarnessError> {
    let topo = build_network(scenario)?;
    let mut sim = scenario.sim.clone();
    if let Some(d) = opts.episode_duration {
        sim.episode_duration = d;
    }
    let (agents, nets, kind, fallback, greedy) = match controller {
        Controller::Fst(f) => (vec![], vec![], ObservationKind::Single, f.plan(), true),
        Controller::Fixed(p) => (vec![], vec![], ObservationKind::Single, *p, true),
        Controller::Policy(pc) => {
            let mut agents = Vec::new();
            let mut nets = Vec::new();
            for (id, net) in &pc.agents {
                let ix = topo
                    .intersection_index(id)
                    .ok_or_else(|| HarnessError::Spec(format!("scenario has no intersection '{id}'")))?;
                agents.push(ix);
                nets.push(net);
            }
            (agents, nets, pc.observation, pc.fallback, pc.greedy)
        }
    };
    let ids = topo.intersection_ids();
    let mut env =
        TrafficEnv::new(topo, sim, agents, kind, RewardConfig::default(), false, fallback)?.with_metrics(opts.window);
    if opts.arrival_digest {
        env = env.with_event_log();
    }
    env.reset(seed)?;
    let mut states: Vec<RecurrentState> = nets.iter().map(|n| n.initial_state()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.sample_seed ^ seed);
    loop {
        match env.poll()? {
            EnvEvent::Decide(ds) => {
                for d in ds {
                    let net = nets[d.agent];
                    let (out, next) = net.step(&d.observation, &states[d.agent])?;
                    states[d.agent] = next;
                    let a = if greedy { greedy_action(&out.logits) } else { sample_action(&out.logits, &mut rng) };
                    env.act(d.agent, action_to_plan(&a.indices)?)?;
                }
            }
            EnvEvent::Done(_) => break,
        }
    }
    let samples = env.metrics().to_vec();
    let (avg_delay, avg_density) = time_averages(&samples);
    let (plans_emitted, plan_violations) = env.plan_stats();
    Ok(EpisodeResult {
        seed,
        intersection_ids: ids,
        samples,
        avg_delay,
        avg_density,
        arrival_digest: opts.arrival_digest.then(|| env.network().expect("reset").arrival_digest()),
        plans_emitted,
        plan_violations,
    })
}

/// Resolves `p` against `base` unless it is absolute.
pub(crate) fn resolve(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::builtin;

    #[test]
    fn fst_120_delays_more_than_fst_60_under_saturation() {
        let mut cfg = builtin("single").unwrap();
        for s in &mut cfg.sections {
            s.arrival = Some(crate::sim::ArrivalProcess::Weibull {
                shape: 2.0,
                scale: crate::sim::arrivals::weibull_scale_for_rate(0.11, 2.0),
            });
        }
        let opts = EvalOptions::default();
        for seed in 0..3 {
            let a = evaluate_episode(&cfg, &Controller::fst(60).unwrap(), seed, &opts).unwrap();
            let b = evaluate_episode(&cfg, &Controller::fst(120).unwrap(), seed, &opts).unwrap();
            assert_eq!(a.arrival_digest, b.arrival_digest);
            assert!(b.avg_delay > a.avg_delay, "seed {seed}: {} vs {}", b.avg_delay, a.avg_delay);
        }
    }
}
