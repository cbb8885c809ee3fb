use std::path::Path;
use std::sync::atomic::AtomicBool;
use std::time::Instant;

use serde_json::json;

use super::config::{Regime, RunConfig, TrainConfig};
use super::env::{Environment, ObservationKind, TrafficEnv};
use super::store::{RmsProp, SharedParameterStore};
use super::worker::{run_group, GroupOutcome, UpdateHook, UpdateRecord, Worker, UPDATE_COLUMNS};
use super::A3cError;
use crate::nn::{checkpoint, NetConfig, PolicyValueNet};
use crate::sim::arrivals::splitmix64;
use crate::sim::metrics::{csv_fields, csv_header, fmt_num};
use crate::sim::{build_network, MetricsSample, NetworkTopology, ScenarioConfig, SignalPlan, APPROACH_NAMES};

/// Seed of worker `id`'s action sampler.
pub fn worker_seed(run_seed: u64, id: usize) -> u64 {
    splitmix64(run_seed ^ 0xa3c0_0000_0000_0000 ^ id as u64)
}

/// Result of [`run_training`] before any regime-specific packaging.
#[derive(Debug)]
pub struct CoreOutcome {
    pub params: Vec<PolicyValueNet>,
    pub store_updates: Vec<u64>,
    pub groups: Vec<GroupOutcome>,
    /// One line per environment instance that aborted.
    pub failures: Vec<String>,
    pub labels: Vec<String>,
}

/// Trains `nets` (one per store) with `num_workers` environment instances
/// built by `make_env`; agent `a` of every instance learns into store
/// `store_of_agent[a]`.
pub fn run_training<E, F>(
    make_env: F,
    nets: Vec<PolicyValueNet>,
    store_of_agent: &[usize],
    cfg: &TrainConfig,
    hook: Option<&UpdateHook<'_>>,
) -> Result<CoreOutcome, A3cError>
where
    E: Environment + Send,
    F: Fn(usize) -> Result<E> + Sync,
{
    cfg.validate()?;
    if let Some(&bad) = store_of_agent.iter().find(|&&s| s >= nets.len()) {
        return Err(A3cError::Config(format!("agent mapped to missing store {bad}")));
    }
    let opt = RmsProp { learning_rate: cfg.learning_rate, decay: cfg.rms_decay, epsilon: cfg.rms_epsilon };
    let stores: Vec<SharedParameterStore> =
        nets.iter().map(|n| SharedParameterStore::new(n.params().clone(), opt)).collect();
    let n_agents = store_of_agent.len();

    let mut setups = Vec::with_capacity(cfg.num_workers);
    for r in 0..cfg.num_workers {
        let env = make_env(r)?;
        if env.num_agents() != n_agents {
            return Err(A3cError::Config(format!("environment has {} agents, expected {n_agents}", env.num_agents())));
        }
        let labels = env.agent_labels();
        let mut workers = Vec::with_capacity(n_agents);
        for (a, &s) in store_of_agent.iter().enumerate() {
            let id = r * n_agents + a;
            workers.push(Worker::new(id, labels[a].clone(), s, &stores[s], &nets[s], worker_seed(cfg.seed, id))?);
        }
        setups.push((env, workers));
    }
    let labels = setups[0].0.agent_labels();
    let stop = AtomicBool::new(false);
    let results: Vec<Result<GroupOutcome, A3cError>> = if setups.len() == 1 {
        let (env, workers) = &mut setups[0];
        vec![run_group(0, env, workers, &stores, cfg, hook, &stop)]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = setups
                .iter_mut()
                .enumerate()
                .map(|(r, (env, workers))| {
                    let (stores, stop) = (&stores, &stop);
                    s.spawn(move || run_group(r, env, workers, stores, cfg, hook, stop))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(A3cError::Env("worker thread panicked".into()))))
                .collect()
        })
    };

    let mut groups = Vec::new();
    let mut failures = Vec::new();
    let mut first_err = None;
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(g) => groups.push(g),
            Err(e) => {
                failures.push(format!("environment instance {r}: {e}"));
                first_err.get_or_insert(e);
            }
        }
    }
    if groups.is_empty() {
        return Err(first_err.expect("at least one instance ran"));
    }
    let store_updates = stores.iter().map(|s| s.update_count()).collect();
    let params = stores
        .into_iter()
        .zip(nets)
        .map(|(s, mut n)| {
            n.set_params(s.into_params())?;
            Ok(n)
        })
        .collect::<Result<Vec<_>, A3cError>>()?;
    Ok(CoreOutcome { params, store_updates, groups, failures, labels })
}

type Result<T, E = A3cError> = std::result::Result<T, E>;

#[derive(Debug)]
pub struct TrainOutcome {
    pub config: RunConfig,
    /// `(file stem, network)`: `agent` or `agent_<ID>` under independent learners.
    pub checkpoints: Vec<(String, PolicyValueNet)>,
    pub records: Vec<UpdateRecord>,
    /// Traffic metrics of the first environment instance over all training episodes.
    pub metrics: Vec<MetricsSample>,
    pub intersection_ids: Vec<String>,
    pub controlled: Vec<String>,
    pub workers: usize,
    pub store_updates: Vec<u64>,
    pub plans_emitted: u64,
    pub plan_violations: u64,
    pub episodes: u64,
    pub failures: Vec<String>,
    pub wall_seconds: f64,
}

/// Intersection indices to control, validated against the regime.
pub fn controlled_intersections(topo: &NetworkTopology, cfg: &TrainConfig) -> Result<Vec<usize>> {
    let agents: Vec<usize> = if cfg.intersections.is_empty() {
        (0..topo.intersections.len()).collect()
    } else {
        cfg.intersections
            .iter()
            .map(|id| {
                topo.intersection_index(id)
                    .ok_or_else(|| A3cError::Config(format!("scenario has no intersection '{id}'")))
            })
            .collect::<Result<_>>()?
    };
    match cfg.regime {
        Regime::Single if agents.len() != 1 => Err(A3cError::Config(format!(
            "regime single needs exactly one controlled intersection, scenario '{}' gives {}",
            topo.name,
            agents.len()
        ))),
        Regime::Inrl | Regime::SharedAsync if agents.len() < 2 => Err(A3cError::Config(format!(
            "regime {} needs at least two controlled intersections, scenario '{}' gives {}",
            cfg.regime.name(),
            topo.name,
            agents.len()
        ))),
        _ => Ok(agents),
    }
}

pub fn observation_kind(config: &RunConfig) -> ObservationKind {
    match config.train.regime {
        Regime::Single => ObservationKind::Single,
        Regime::Inrl if !config.inrl.observe_neighbors => ObservationKind::Isolated,
        _ => ObservationKind::Neighbors,
    }
}

/// Builds the training environment for a scenario and resolved configuration.
pub fn make_traffic_env(scenario: &ScenarioConfig, config: &RunConfig) -> Result<TrafficEnv> {
    let topo = build_network(scenario)?;
    let agents = controlled_intersections(&topo, &config.train)?;
    let mut sim = scenario.sim.clone();
    if let Some(d) = config.train.episode_duration {
        sim.episode_duration = d;
    }
    let env = TrafficEnv::new(
        topo,
        sim,
        agents,
        observation_kind(config),
        config.reward.clone(),
        config.coordination(),
        SignalPlan::uniform(config.train.uncontrolled_fst)?,
    )?;
    Ok(env.with_metrics(config.train.metrics_window))
}

/// Trains a regime on a scenario. Writes checkpoints, `metrics.csv`,
/// `updates.csv` and `manifest.json` when `out_dir` is given.
pub fn train(scenario: &ScenarioConfig, config: RunConfig, out_dir: Option<&Path>) -> Result<TrainOutcome> {
    train_with_hook(scenario, config, out_dir, None)
}

pub fn train_with_hook(
    scenario: &ScenarioConfig,
    config: RunConfig,
    out_dir: Option<&Path>,
    hook: Option<&UpdateHook<'_>>,
) -> Result<TrainOutcome> {
    let started = Instant::now();
    let config = config.resolved()?;
    let template_env = make_traffic_env(scenario, &config)?;
    let n_agents = template_env.num_agents();
    let intersection_ids = template_env.topology().intersection_ids();
    let controlled = template_env.agent_labels();
    let net_cfg = NetConfig { variant: config.train.regime.variant(), ..config.nn.clone() };
    let (nets, store_of_agent): (Vec<PolicyValueNet>, Vec<usize>) = match config.train.regime {
        Regime::Inrl => (
            (0..n_agents)
                .map(|a| PolicyValueNet::new(net_cfg.clone(), splitmix64(config.train.seed.wrapping_add(a as u64))))
                .collect::<Result<_, _>>()?,
            (0..n_agents).collect(),
        ),
        _ => (vec![PolicyValueNet::new(net_cfg.clone(), splitmix64(config.train.seed))?], vec![0; n_agents]),
    };
    let core = run_training(|_| Ok(template_env.clone()), nets, &store_of_agent, &config.train, hook)?;

    let checkpoints: Vec<(String, PolicyValueNet)> = match config.train.regime {
        Regime::Inrl => controlled.iter().map(|id| format!("agent_{id}")).zip(core.params).collect(),
        _ => vec![("agent".to_string(), core.params.into_iter().next().expect("one store"))],
    };
    let mut records: Vec<UpdateRecord> = core.groups.iter().flat_map(|g| g.records.iter().cloned()).collect();
    records.sort_by_key(|r| (r.worker, r.update));
    let outcome = TrainOutcome {
        checkpoints,
        metrics: core.groups[0].metrics.clone(),
        intersection_ids,
        controlled,
        workers: config.train.num_workers * n_agents,
        store_updates: core.store_updates,
        plans_emitted: core.groups.iter().map(|g| g.plans_emitted).sum(),
        plan_violations: core.groups.iter().map(|g| g.plan_violations).sum(),
        episodes: core.groups.iter().map(|g| g.episodes).sum(),
        failures: core.failures,
        records,
        config,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out_dir {
        write_outputs(dir, scenario, &outcome, n_agents)?;
    }
    Ok(outcome)
}

pub const LOSS_COLUMNS: [&str; 4] = ["policy_loss", "value_loss", "entropy", "mean_reward"];

/// Training metrics: traffic columns plus the mean loss components of the
/// first instance's updates that fell in each window.
pub fn training_metrics_csv(outcome: &TrainOutcome, first_instance_workers: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = csv_header(&outcome.intersection_ids);
    header.extend(LOSS_COLUMNS.iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(csv_err)?;
    let first: Vec<&UpdateRecord> = outcome.records.iter().filter(|r| r.worker < first_instance_workers).collect();
    let mut start = 0.0;
    for s in &outcome.metrics {
        let inside: Vec<&&UpdateRecord> = first.iter().filter(|r| r.t > start && r.t <= s.t).collect();
        let mut row = csv_fields(s);
        if inside.is_empty() {
            row.extend(std::iter::repeat(String::new()).take(LOSS_COLUMNS.len()));
        } else {
            let n = inside.len() as f64;
            let mean = |f: fn(&UpdateRecord) -> f64| fmt_num(inside.iter().map(|r| f(r)).sum::<f64>() / n);
            row.push(mean(|r| r.policy_loss));
            row.push(mean(|r| r.value_loss));
            row.push(mean(|r| r.entropy));
            row.push(mean(|r| r.mean_reward));
        }
        w.write_record(&row).map_err(csv_err)?;
        start = s.t;
    }
    w.into_inner().map_err(|e| A3cError::Io(std::io::Error::other(e.to_string())))
}

pub fn updates_csv(records: &[UpdateRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(UPDATE_COLUMNS).map_err(csv_err)?;
    for r in records {
        w.write_record(r.csv_fields()).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| A3cError::Io(std::io::Error::other(e.to_string())))
}

fn csv_err(e: csv::Error) -> A3cError {
    A3cError::Io(std::io::Error::other(e.to_string()))
}

fn write_outputs(dir: &Path, scenario: &ScenarioConfig, outcome: &TrainOutcome, n_agents: usize) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (stem, net) in &outcome.checkpoints {
        let name = format!("{stem}.ckpt");
        checkpoint::save(&dir.join(&name), net)?;
        files.push(name);
    }
    std::fs::write(dir.join("metrics.csv"), training_metrics_csv(outcome, n_agents)?)?;
    std::fs::write(dir.join("updates.csv"), updates_csv(&outcome.records)?)?;
    let topo = build_network(scenario)?;
    let neighbor_order: serde_json::Map<String, serde_json::Value> = topo
        .intersections
        .iter()
        .zip(&topo.neighbor_map)
        .map(|(i, ns)| {
            let ids: Vec<&str> = ns.iter().map(|&n| topo.intersections[n].id.as_str()).collect();
            (i.id.clone(), json!(ids))
        })
        .collect();
    let first = &outcome.checkpoints[0].1;
    let manifest = json!({
        "kind": "train",
        "regime": outcome.config.train.regime.name(),
        "scenario": scenario.name,
        "scenario_config": scenario,
        "config": outcome.config,
        "controlled_intersections": outcome.controlled,
        "checkpoints": files,
        "parameter_counts": outcome.checkpoints.iter().map(|(s, n)| (s.clone(), n.num_params())).collect::<std::collections::BTreeMap<_, _>>(),
        "workers": outcome.workers,
        "seeds": {
            "run": outcome.config.train.seed,
            "workers": (0..outcome.workers).map(|id| worker_seed(outcome.config.train.seed, id)).collect::<Vec<_>>(),
        },
        "store_updates": outcome.store_updates,
        "episodes": outcome.episodes,
        "plans_emitted": outcome.plans_emitted,
        "plan_violations": outcome.plan_violations,
        "failures": outcome.failures,
        "ordering": {
            "phase_order": APPROACH_NAMES,
            "neighbor_order": neighbor_order,
            "lstm_gate_order": ["input", "forget", "cell", "output"],
            "parameter_order": first.param_names(),
            "observation": match observation_kind(&outcome.config) {
                ObservationKind::Single => "single",
                ObservationKind::Neighbors => "neighbors",
                ObservationKind::Isolated => "isolated",
            },
        },
        "wall_seconds": outcome.wall_seconds,
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest).expect("manifest serializes"))?;
    Ok(())
}
