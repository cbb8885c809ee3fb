use super::{plan_is_valid, A3cError, GreenPlan};
use crate::encoding::{build_isolated_matrix, build_neighbor_matrix, build_single_state};
use crate::rewards::{combined_reward, global_reward, step_reward, DensitySnapshot, RewardConfig};
use crate::sim::{MetricsRecorder, MetricsSample, Network, NetworkTopology, SignalPlan, SimConfig};

/// An agent's turn to act. `reward` is the clipped reward earned by its
/// previous action, absent on its first decision of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub agent: usize,
    pub observation: Vec<f64>,
    pub reward: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvEvent {
    /// These agents must call [`Environment::act`] before the next poll.
    Decide(Vec<Decision>),
    /// The episode was truncated; carries the final reward and observation of
    /// every agent with an action in flight.
    Done(Vec<Decision>),
}

/// A multi-agent, event-driven environment with cycle-level decisions.
pub trait Environment {
    fn num_agents(&self) -> usize;
    /// Human-readable label per agent.
    fn agent_labels(&self) -> Vec<String>;
    fn reset(&mut self, seed: u64) -> Result<(), A3cError>;
    /// Advances until some agent must decide or the episode ends.
    fn poll(&mut self) -> Result<EnvEvent, A3cError>;
    fn act(&mut self, agent: usize, plan: GreenPlan) -> Result<(), A3cError>;
    /// `(plans applied, plans outside the action set)` over the env's lifetime.
    fn plan_stats(&self) -> (u64, u64);
    /// Simulation seconds since the episode started.
    fn clock(&self) -> f64 {
        0.0
    }
    /// Windowed traffic metrics of the episode so far.
    fn episode_metrics(&self) -> Vec<MetricsSample> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationKind {
    /// 8-vector of the agent's own intersection.
    Single,
    /// 4x8 matrix with neighbour rows.
    Neighbors,
    /// 4x8 matrix with only the own row.
    Isolated,
}

/// The simulator seen as an [`Environment`]: one agent per controlled
/// intersection, the rest running a fixed plan.
#[derive(Debug, Clone)]
pub struct TrafficEnv {
    topology: NetworkTopology,
    sim: SimConfig,
    agents: Vec<usize>,
    obs_kind: ObservationKind,
    reward: RewardConfig,
    coordination: bool,
    fallback: SignalPlan,
    metrics_window: Option<f64>,
    net: Option<Network>,
    recorder: Option<MetricsRecorder>,
    needs_decision: Vec<bool>,
    pending: Vec<bool>,
    last_snapshot: Vec<Option<DensitySnapshot>>,
    last_clipped: Vec<f64>,
    plans_emitted: u64,
    plan_violations: u64,
    event_log: bool,
}

impl TrafficEnv {
    pub fn new(
        topology: NetworkTopology,
        sim: SimConfig,
        agents: Vec<usize>,
        obs_kind: ObservationKind,
        reward: RewardConfig,
        coordination: bool,
        fallback: SignalPlan,
    ) -> Result<Self, A3cError> {
        sim.validate()?;
        let n = topology.intersections.len();
        if let Some(&bad) = agents.iter().find(|&&a| a >= n) {
            return Err(A3cError::Config(format!("agent intersection index {bad} out of range")));
        }
        let mut sorted = agents.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != agents.len() {
            return Err(A3cError::Config("an intersection is controlled twice".into()));
        }
        let k = agents.len();
        Ok(Self {
            topology,
            sim,
            agents,
            obs_kind,
            reward,
            coordination,
            fallback,
            metrics_window: None,
            net: None,
            recorder: None,
            needs_decision: vec![false; k],
            pending: vec![false; k],
            last_snapshot: vec![None; k],
            last_clipped: vec![0.0; k],
            plans_emitted: 0,
            plan_violations: 0,
            event_log: false,
        })
    }

    /// Records windowed metrics over all intersections in every episode.
    pub fn with_metrics(mut self, window: f64) -> Self {
        self.metrics_window = Some(window);
        self
    }

    /// Records the full arrival/discharge event log in every episode.
    pub fn with_event_log(mut self) -> Self {
        self.event_log = true;
        self
    }

    pub fn network(&self) -> Option<&Network> {
        self.net.as_ref()
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn agent_intersections(&self) -> &[usize] {
        &self.agents
    }

    /// Metrics of the current episode so far (complete after `Done`).
    pub fn metrics(&self) -> &[MetricsSample] {
        self.recorder.as_ref().map(|r| r.samples()).unwrap_or(&[])
    }

    fn observe(&self, agent: usize) -> Result<Vec<f64>, A3cError> {
        let net = self.net.as_ref().expect("reset before observe");
        let ix = self.agents[agent];
        Ok(match self.obs_kind {
            ObservationKind::Single => build_single_state(net, ix)?.to_vec().to_vec(),
            ObservationKind::Neighbors => build_neighbor_matrix(net, ix)?.to_vec().to_vec(),
            ObservationKind::Isolated => build_isolated_matrix(net, ix)?.to_vec().to_vec(),
        })
    }

    fn snapshot(&self, agent: usize) -> Result<DensitySnapshot, A3cError> {
        let net = self.net.as_ref().expect("reset before snapshot");
        Ok(DensitySnapshot::new(net.measure_density(self.agents[agent]), net.time())?)
    }

    /// Individual clipped rewards for `agents`, fused with the global reward
    /// when coordination is on.
    fn rewards(&mut self, agents: &[usize]) -> Result<Vec<Option<f64>>, A3cError> {
        let mut out = Vec::with_capacity(agents.len());
        for &a in agents {
            let r = match self.last_snapshot[a] {
                Some(before) if self.pending[a] => {
                    let after = self.snapshot(a)?;
                    let r = step_reward(&before, &after, self.reward.aggregate)?.clipped;
                    self.last_clipped[a] = r;
                    Some(r)
                }
                _ => None,
            };
            out.push(r);
        }
        if self.coordination {
            let g = global_reward(&self.last_clipped, self.agents.len())?;
            for r in out.iter_mut().flatten() {
                *r = combined_reward(g, *r, self.reward.global_weight)?.clipped;
            }
        }
        Ok(out)
    }
}

impl Environment for TrafficEnv {
    fn num_agents(&self) -> usize {
        self.agents.len()
    }

    fn agent_labels(&self) -> Vec<String> {
        self.agents.iter().map(|&ix| self.topology.intersections[ix].id.clone()).collect()
    }

    fn reset(&mut self, seed: u64) -> Result<(), A3cError> {
        let mut net = Network::new(&self.topology, &self.sim, seed)?;
        if self.event_log {
            net.enable_event_log();
        }
        for ix in 0..self.topology.intersections.len() {
            if !self.agents.contains(&ix) {
                net.set_plan(ix, self.fallback)?;
            }
        }
        self.recorder = self
            .metrics_window
            .map(|w| MetricsRecorder::new((0..self.topology.intersections.len()).collect(), w));
        self.net = Some(net);
        let k = self.agents.len();
        self.needs_decision = vec![true; k];
        self.pending = vec![false; k];
        self.last_snapshot = vec![None; k];
        self.last_clipped = vec![0.0; k];
        Ok(())
    }

    fn poll(&mut self) -> Result<EnvEvent, A3cError> {
        if self.net.is_none() {
            return Err(A3cError::Env("poll before reset".into()));
        }
        loop {
            let net = self.net.as_ref().expect("checked");
            if net.episode_finished() {
                let t = net.time();
                if let Some(r) = self.recorder.as_mut() {
                    r.flush(t);
                }
                let agents: Vec<usize> = (0..self.agents.len()).filter(|&a| self.pending[a]).collect();
                let rewards = self.rewards(&agents)?;
                let mut out = Vec::with_capacity(agents.len());
                for (&a, r) in agents.iter().zip(rewards) {
                    out.push(Decision { agent: a, observation: self.observe(a)?, reward: r });
                    self.pending[a] = false;
                }
                return Ok(EnvEvent::Done(out));
            }
            let ready: Vec<usize> = (0..self.agents.len()).filter(|&a| self.needs_decision[a]).collect();
            if !ready.is_empty() {
                let rewards = self.rewards(&ready)?;
                let mut out = Vec::with_capacity(ready.len());
                for (&a, r) in ready.iter().zip(rewards) {
                    out.push(Decision { agent: a, observation: self.observe(a)?, reward: r });
                }
                return Ok(EnvEvent::Decide(out));
            }
            let net = self.net.as_mut().expect("checked");
            let exits = net.step()?;
            if let Some(r) = self.recorder.as_mut() {
                r.observe(net, &exits);
            }
            for (a, &ix) in self.agents.iter().enumerate() {
                if net.intersection(ix).at_cycle_boundary() {
                    self.needs_decision[a] = true;
                }
            }
        }
    }

    fn act(&mut self, agent: usize, plan: GreenPlan) -> Result<(), A3cError> {
        if agent >= self.agents.len() || !self.needs_decision[agent] {
            return Err(A3cError::Env(format!("agent {agent} acted out of turn")));
        }
        let greens = plan.greens();
        self.plans_emitted += 1;
        if !plan_is_valid(&greens) {
            self.plan_violations += 1;
        }
        let snap = self.snapshot(agent)?;
        let ix = self.agents[agent];
        self.net.as_mut().expect("reset before act").set_plan(ix, plan.to_signal_plan())?;
        self.last_snapshot[agent] = Some(snap);
        self.needs_decision[agent] = false;
        self.pending[agent] = true;
        Ok(())
    }

    fn plan_stats(&self) -> (u64, u64) {
        (self.plans_emitted, self.plan_violations)
    }

    fn clock(&self) -> f64 {
        self.net.as_ref().map_or(0.0, Network::time)
    }

    fn episode_metrics(&self) -> Vec<MetricsSample> {
        self.metrics().to_vec()
    }
}

/// Degenerate one-agent environment: reward +1 exactly when head 0 picks
/// index 0 (a 20 s first green), otherwise 0. The observation never changes.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    obs_len: usize,
    episode_len: u64,
    step: u64,
    last: Option<GreenPlan>,
    plans_emitted: u64,
    plan_violations: u64,
}

impl BanditEnv {
    pub fn new(obs_len: usize, episode_len: u64) -> Self {
        Self { obs_len, episode_len: episode_len.max(1), step: 0, last: None, plans_emitted: 0, plan_violations: 0 }
    }

    pub fn observation(&self) -> Vec<f64> {
        (0..self.obs_len).map(|i| if i % 2 == 0 { 1.0 } else { 0.5 }).collect()
    }

    fn reward(&self) -> Option<f64> {
        self.last.map(|p| if p.greens()[0] == super::MIN_GREEN { 1.0 } else { 0.0 })
    }
}

impl Environment for BanditEnv {
    fn num_agents(&self) -> usize {
        1
    }

    fn agent_labels(&self) -> Vec<String> {
        vec!["bandit".into()]
    }

    fn reset(&mut self, _seed: u64) -> Result<(), A3cError> {
        self.step = 0;
        self.last = None;
        Ok(())
    }

    fn poll(&mut self) -> Result<EnvEvent, A3cError> {
        let d = Decision { agent: 0, observation: self.observation(), reward: self.reward() };
        if self.step >= self.episode_len {
            self.last = None;
            return Ok(EnvEvent::Done(vec![d]));
        }
        Ok(EnvEvent::Decide(vec![d]))
    }

    fn act(&mut self, agent: usize, plan: GreenPlan) -> Result<(), A3cError> {
        if agent != 0 {
            return Err(A3cError::Env(format!("bandit has one agent, got {agent}")));
        }
        self.plans_emitted += 1;
        if !plan_is_valid(&plan.greens()) {
            self.plan_violations += 1;
        }
        self.last = Some(plan);
        self.step += 1;
        Ok(())
    }

    fn plan_stats(&self) -> (u64, u64) {
        (self.plans_emitted, self.plan_violations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::a3c::action_to_plan;
    use crate::sim::build_network;
    use crate::sim::scenario::builtin;

    fn env(name: &str, coordination: bool) -> TrafficEnv {
        let cfg = builtin(name).unwrap();
        let topo = build_network(&cfg).unwrap();
        let n = topo.intersections.len();
        let kind = if n == 1 { ObservationKind::Single } else { ObservationKind::Neighbors };
        TrafficEnv::new(
            topo,
            cfg.sim.clone(),
            (0..n).collect(),
            kind,
            RewardConfig::default(),
            coordination,
            SignalPlan::uniform(60).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn decisions_arrive_at_cycle_ends() {
        let mut e = env("single", false);
        e.reset(1).unwrap();
        let EnvEvent::Decide(d) = e.poll().unwrap() else { panic!() };
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].reward, None);
        assert_eq!(d[0].observation.len(), 8);
        e.act(0, action_to_plan(&[0, 0, 0, 0]).unwrap()).unwrap();
        let EnvEvent::Decide(d) = e.poll().unwrap() else { panic!() };
        assert_eq!(e.network().unwrap().time(), 80.0);
        assert!(matches!(d[0].reward, Some(r) if r == -1.0 || r == 0.0 || r == 1.0));
        assert!(e.act(0, action_to_plan(&[0; 4]).unwrap()).is_ok());
        assert!(e.act(0, action_to_plan(&[0; 4]).unwrap()).is_err());
    }

    #[test]
    fn episode_ends_with_final_rewards() {
        let mut e = env("corridor4", true).with_metrics(90.0);
        e.reset(2).unwrap();
        let mut decisions = 0;
        loop {
            match e.poll().unwrap() {
                EnvEvent::Decide(ds) => {
                    for d in ds {
                        assert_eq!(d.observation.len(), 32);
                        decisions += 1;
                        e.act(d.agent, action_to_plan(&[8, 0, 8, 0]).unwrap()).unwrap();
                    }
                }
                EnvEvent::Done(ds) => {
                    assert_eq!(ds.len(), 4);
                    assert!(ds.iter().all(|d| d.reward.is_some()));
                    break;
                }
            }
        }
        // 3600 s of 160 s cycles: 23 decisions per intersection
        assert_eq!(decisions, 4 * 23);
        assert_eq!(e.metrics().len(), 40);
        assert_eq!(e.plan_stats(), (92, 0));
    }
}
