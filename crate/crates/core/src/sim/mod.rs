//! Point-queue traffic network simulator.
//!
//! Every approach is a vertical queue: a vehicle entering a section needs its
//! free-flow travel time to reach the stop line, after which it may discharge
//! during green at the saturation flow rate. Discharged vehicles are routed
//! through the intersection's turn matrix into a downstream section or out of
//! the network. The network is advanced in fixed timesteps and is fully
//! determined by its scenario, configuration, seed and signal plans.

pub mod arrivals;
pub mod metrics;
pub mod scenario;

use std::collections::VecDeque;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use arrivals::{sample_interarrival, weibull_mean, ArrivalProcess};
use arrivals::{route_uniform, ArrivalStream};
pub use metrics::{DelaySample, MetricsRecorder, MetricsSample};
pub use scenario::{build_network, NetworkTopology, ScenarioConfig, SimConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("intersection '{0}' has no active signal plan")]
    NoPlan(String),
    #[error("invalid signal plan: {0}")]
    Plan(String),
    #[error("simulator invariant violated: {0}")]
    Invariant(String),
}

/// Approach sides in phase order.
pub const APPROACH_NAMES: [&str; 4] = ["Upper", "Right", "Lower", "Left"];

/// Green durations (seconds) for the four phases of one cycle.
///
/// The simulator accepts any non-negative durations; the RL action space adds
/// its own tighter bounds on top of this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignalPlan {
    pub greens: [u32; 4],
}

impl SignalPlan {
    pub fn new(greens: [u32; 4]) -> Result<Self, SimError> {
        if greens.iter().all(|&g| g == 0) {
            return Err(SimError::Plan("a plan needs at least one non-zero green".into()));
        }
        Ok(Self { greens })
    }

    pub fn uniform(green: u32) -> Result<Self, SimError> {
        Self::new([green; 4])
    }

    /// Cycle length in seconds including one intergreen after every phase.
    pub fn cycle_seconds(&self, intergreen: f64) -> f64 {
        self.greens.iter().map(|&g| g as f64).sum::<f64>() + 4.0 * intergreen
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleRecord {
    pub id: u64,
    /// Time the vehicle entered its current section.
    pub entry_time: f64,
    /// Free-flow traversal time of the current section.
    pub ideal_travel_time: f64,
    route_seed: u64,
    hops: u32,
}

/// Run-time state of one road section.
#[derive(Debug, Clone)]
pub struct RoadSection {
    pub spec: scenario::SectionSpec,
    pub queue: VecDeque<VehicleRecord>,
    pub cumulative_entered: u64,
    pub cumulative_exited: u64,
    credit: f64,
}

impl RoadSection {
    pub fn density(&self) -> f64 {
        self.queue.len() as f64 / self.spec.length_km
    }
}

/// Signal timing state of one intersection.
#[derive(Debug, Clone)]
struct SignalState {
    plan: Option<SignalPlan>,
    /// Phase currently (or most recently) green, 0..3.
    phase: usize,
    in_intergreen: bool,
    steps_left: u64,
    at_boundary: bool,
    cycles_completed: u64,
}

#[derive(Debug, Clone)]
pub struct IntersectionNode {
    pub spec: scenario::IntersectionSpec,
    signal: SignalState,
}

impl IntersectionNode {
    pub fn id(&self) -> &str {
        &self.spec.id
    }

    /// Index of the phase that is green, or was last green during all-red.
    pub fn current_phase(&self) -> usize {
        self.signal.phase
    }

    pub fn active_plan(&self) -> Option<SignalPlan> {
        self.signal.plan
    }

    /// True between cycles, when a new plan may be installed.
    pub fn at_cycle_boundary(&self) -> bool {
        self.signal.at_boundary
    }

    pub fn cycles_completed(&self) -> u64 {
        self.signal.cycles_completed
    }

    /// Approach index currently discharging, if any.
    pub fn green_approach(&self) -> Option<usize> {
        match self.signal.plan {
            Some(_) if !self.signal.in_intergreen && !self.signal.at_boundary => Some(self.signal.phase),
            _ => None,
        }
    }
}

/// A vehicle leaving an approach during a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitEvent {
    pub t: f64,
    pub vehicle: u64,
    pub intersection: usize,
    pub approach: usize,
    pub section: usize,
    /// Downstream section, or `None` when the vehicle leaves the network.
    pub to: Option<usize>,
    /// Travel time in excess of free flow, per kilometre of the section left.
    pub delay_s_per_km: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimEvent {
    Arrival { t: f64, section: usize, vehicle: u64 },
    Discharge { t: f64, section: usize, vehicle: u64, to: Option<usize> },
}

/// Per-approach densities and timing of one executed cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub t_start: f64,
    pub t_end: f64,
    pub duration: f64,
    pub densities_before: [f64; 4],
    pub densities_after: [f64; 4],
    pub discharged: [u64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct ExitRecord {
    t: f64,
    delay_s_per_km: f64,
}

/// One simulation instance. Single-writer: step it from one thread at a time.
#[derive(Debug, Clone)]
pub struct Network {
    topology: NetworkTopology,
    config: SimConfig,
    seed: u64,
    sections: Vec<RoadSection>,
    intersections: Vec<IntersectionNode>,
    streams: Vec<Option<ArrivalStream>>,
    step_index: u64,
    next_vehicle: u64,
    entered: u64,
    exited: u64,
    exit_log: Vec<Vec<ExitRecord>>,
    intergreen_steps: u64,
    events: Option<Vec<SimEvent>>,
}

impl Network {
    /// Creates a fresh instance. `seed` drives every arrival stream and routing choice.
    pub fn new(topology: &NetworkTopology, config: &SimConfig, seed: u64) -> Result<Self, SimError> {
        config.validate()?;
        let intergreen_steps = config.steps_for(config.intergreen)?;
        let sections = topology
            .sections
            .iter()
            .map(|spec| RoadSection {
                spec: spec.clone(),
                queue: VecDeque::new(),
                cumulative_entered: 0,
                cumulative_exited: 0,
                credit: 0.0,
            })
            .collect();
        let streams = topology
            .sections
            .iter()
            .enumerate()
            .map(|(k, s)| s.arrival.map(|p| ArrivalStream::new(p, seed, k)))
            .collect();
        let intersections = topology
            .intersections
            .iter()
            .map(|spec| IntersectionNode {
                spec: spec.clone(),
                signal: SignalState {
                    plan: None,
                    phase: 3,
                    in_intergreen: false,
                    steps_left: 0,
                    at_boundary: true,
                    cycles_completed: 0,
                },
            })
            .collect();
        Ok(Self {
            topology: topology.clone(),
            config: config.clone(),
            seed,
            sections,
            intersections,
            streams,
            step_index: 0,
            next_vehicle: 0,
            entered: 0,
            exited: 0,
            exit_log: vec![Vec::new(); topology.intersections.len()],
            intergreen_steps,
            events: None,
        })
    }

    /// Starts recording every arrival and discharge.
    pub fn enable_event_log(&mut self) {
        self.events.get_or_insert_with(Vec::new);
    }

    pub fn events(&self) -> Option<&[SimEvent]> {
        self.events.as_deref()
    }

    /// Event log rendered as text, one event per line.
    pub fn event_log_bytes(&self) -> Vec<u8> {
        let mut out = String::new();
        for e in self.events.iter().flatten() {
            match *e {
                SimEvent::Arrival { t, section, vehicle } => {
                    let _ = writeln!(out, "A,{t:?},{section},{vehicle}");
                }
                SimEvent::Discharge { t, section, vehicle, to } => {
                    let to = to.map(|s| s.to_string()).unwrap_or_else(|| "exit".into());
                    let _ = writeln!(out, "D,{t:?},{section},{vehicle},{to}");
                }
            }
        }
        out.into_bytes()
    }

    /// SHA-256 of the arrival events only (hex).
    pub fn arrival_digest(&self) -> String {
        let mut h = Sha256::new();
        for e in self.events.iter().flatten() {
            if let SimEvent::Arrival { t, section, vehicle } = *e {
                h.update(t.to_le_bytes());
                h.update((section as u64).to_le_bytes());
                h.update(vehicle.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.config.timestep
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn episode_finished(&self) -> bool {
        self.step_index >= self.config.episode_steps()
    }

    pub fn intersections(&self) -> &[IntersectionNode] {
        &self.intersections
    }

    pub fn intersection(&self, ix: usize) -> &IntersectionNode {
        &self.intersections[ix]
    }

    pub fn sections(&self) -> &[RoadSection] {
        &self.sections
    }

    pub fn total_entered(&self) -> u64 {
        self.entered
    }

    pub fn total_exited(&self) -> u64 {
        self.exited
    }

    pub fn vehicles_in_system(&self) -> u64 {
        self.sections.iter().map(|s| s.queue.len() as u64).sum()
    }

    /// Vehicles per kilometre on each approach, in Upper, Right, Lower, Left order.
    pub fn measure_density(&self, ix: usize) -> [f64; 4] {
        self.intersections[ix].spec.approaches.map(|s| self.sections[s].density())
    }

    /// Mean excess travel time per kilometre of vehicles that left an approach of
    /// `ix` within the last `window` seconds.
    pub fn measure_delay(&self, ix: usize, window: f64) -> Result<DelaySample, SimError> {
        if !(window > 0.0) {
            return Err(SimError::Parameter(format!("delay window must be > 0, got {window}")));
        }
        let now = self.time();
        let mut sum = 0.0;
        let mut n = 0usize;
        for r in self.exit_log[ix].iter().rev() {
            if r.t <= now - window + 1e-9 {
                break;
            }
            sum += r.delay_s_per_km;
            n += 1;
        }
        Ok(DelaySample::from_sum(sum, n))
    }

    /// Installs the plan for the next cycle of `ix`. Only valid at a cycle boundary.
    pub fn set_plan(&mut self, ix: usize, plan: SignalPlan) -> Result<(), SimError> {
        let node = &mut self.intersections[ix];
        if !node.signal.at_boundary {
            return Err(SimError::Plan(format!("intersection '{}' is mid-cycle", node.spec.id)));
        }
        for &g in &plan.greens {
            self.config.steps_for(g as f64)?;
        }
        node.signal.plan = Some(plan);
        Ok(())
    }

    fn start_cycle(&mut self, ix: usize) -> Result<(), SimError> {
        let dt = self.config.timestep;
        let node = &mut self.intersections[ix];
        let plan = node.signal.plan.ok_or_else(|| SimError::NoPlan(node.spec.id.clone()))?;
        node.signal.at_boundary = false;
        node.signal.phase = 0;
        node.signal.in_intergreen = false;
        node.signal.steps_left = (plan.greens[0] as f64 / dt).round() as u64;
        self.sections[node.spec.approaches[0]].credit = 0.0;
        self.settle_signal(ix);
        Ok(())
    }

    /// Skips zero-length intervals until a running one is found or the cycle ends.
    fn settle_signal(&mut self, ix: usize) {
        let dt = self.config.timestep;
        let ig = self.intergreen_steps;
        let node = &mut self.intersections[ix];
        let plan = node.signal.plan.expect("settle without plan");
        while node.signal.steps_left == 0 {
            if !node.signal.in_intergreen {
                node.signal.in_intergreen = true;
                node.signal.steps_left = ig;
            } else if node.signal.phase == 3 {
                node.signal.at_boundary = true;
                node.signal.cycles_completed += 1;
                return;
            } else {
                node.signal.phase += 1;
                node.signal.in_intergreen = false;
                node.signal.steps_left = (plan.greens[node.signal.phase] as f64 / dt).round() as u64;
                self.sections[node.spec.approaches[node.signal.phase]].credit = 0.0;
            }
        }
    }

    /// Advances the network by one timestep.
    ///
    /// Intersections sitting at a cycle boundary start a new cycle with their
    /// installed plan (the previous one is repeated if none was set).
    pub fn step(&mut self) -> Result<Vec<ExitEvent>, SimError> {
        for ix in 0..self.intersections.len() {
            if self.intersections[ix].signal.at_boundary {
                self.start_cycle(ix)?;
            }
        }
        let dt = self.config.timestep;
        let t_end = (self.step_index + 1) as f64 * dt;
        let mut exits = Vec::new();
        let mut transfers: Vec<(usize, VehicleRecord)> = Vec::new();

        for ix in 0..self.intersections.len() {
            let Some(a) = self.intersections[ix].green_approach() else { continue };
            let sid = self.intersections[ix].spec.approaches[a];
            let turn_row = self.intersections[ix].spec.turn_matrix[a];
            let outbound = self.intersections[ix].spec.outbound;
            let section = &mut self.sections[sid];
            section.credit += self.config.saturation_flow * dt;
            let capacity = (section.credit + 1e-9).floor() as u64;
            let mut n = 0u64;
            while n < capacity {
                match section.queue.front() {
                    Some(v) if v.entry_time + v.ideal_travel_time <= t_end + 1e-9 => {}
                    _ => break,
                }
                let v = section.queue.pop_front().expect("front checked");
                n += 1;
                section.cumulative_exited += 1;
                let travel = t_end - v.entry_time;
                let delay = ((travel - v.ideal_travel_time) / section.spec.length_km).max(0.0);
                let side = choose_side(&turn_row, route_uniform(v.route_seed, v.hops));
                let to = outbound[side];
                exits.push(ExitEvent {
                    t: t_end,
                    vehicle: v.id,
                    intersection: ix,
                    approach: a,
                    section: sid,
                    to,
                    delay_s_per_km: delay,
                });
                self.exit_log[ix].push(ExitRecord { t: t_end, delay_s_per_km: delay });
                if let Some(events) = self.events.as_mut() {
                    events.push(SimEvent::Discharge { t: t_end, section: sid, vehicle: v.id, to });
                }
                match to {
                    Some(next) => transfers.push((next, v)),
                    None => self.exited += 1,
                }
            }
            if n < capacity {
                // Capacity is not banked while the queue is empty.
                section.credit = section.credit.fract();
            } else {
                section.credit -= n as f64;
            }
        }

        for (next, v) in transfers {
            let s = &mut self.sections[next];
            s.queue.push_back(VehicleRecord {
                id: v.id,
                entry_time: t_end,
                ideal_travel_time: s.spec.ideal_travel_time(),
                route_seed: v.route_seed,
                hops: v.hops + 1,
            });
            s.cumulative_entered += 1;
        }

        for k in 0..self.streams.len() {
            let Some(stream) = self.streams[k].as_mut() else { continue };
            while stream.peek() < t_end {
                let (t, route_seed) = stream.pop();
                let id = self.next_vehicle;
                self.next_vehicle += 1;
                let s = &mut self.sections[k];
                s.queue.push_back(VehicleRecord {
                    id,
                    entry_time: t,
                    ideal_travel_time: s.spec.ideal_travel_time(),
                    route_seed,
                    hops: 0,
                });
                s.cumulative_entered += 1;
                self.entered += 1;
                if let Some(events) = self.events.as_mut() {
                    events.push(SimEvent::Arrival { t, section: k, vehicle: id });
                }
            }
        }

        for ix in 0..self.intersections.len() {
            let node = &mut self.intersections[ix];
            node.signal.steps_left = node.signal.steps_left.saturating_sub(1);
            self.settle_signal(ix);
        }
        self.step_index += 1;
        self.check_conservation()?;
        Ok(exits)
    }

    fn check_conservation(&self) -> Result<(), SimError> {
        for s in &self.sections {
            if s.cumulative_entered != s.queue.len() as u64 + s.cumulative_exited {
                return Err(SimError::Invariant(format!(
                    "section '{}': entered {} != queued {} + exited {}",
                    s.spec.id,
                    s.cumulative_entered,
                    s.queue.len(),
                    s.cumulative_exited
                )));
            }
        }
        let in_system = self.vehicles_in_system();
        if self.entered != in_system + self.exited {
            return Err(SimError::Invariant(format!(
                "network: entered {} != in-system {in_system} + exited {}",
                self.entered, self.exited
            )));
        }
        Ok(())
    }

    /// Runs one full cycle of `ix` under `plan`, stepping the whole network.
    ///
    /// Other intersections keep cycling with their installed plans.
    pub fn run_cycle(&mut self, ix: usize, plan: SignalPlan) -> Result<CycleReport, SimError> {
        self.set_plan(ix, plan)?;
        let t_start = self.time();
        let densities_before = self.measure_density(ix);
        let mut discharged = [0u64; 4];
        loop {
            for e in self.step()? {
                if e.intersection == ix {
                    discharged[e.approach] += 1;
                }
            }
            if self.intersections[ix].signal.at_boundary {
                break;
            }
        }
        let t_end = self.time();
        Ok(CycleReport {
            t_start,
            t_end,
            duration: t_end - t_start,
            densities_before,
            densities_after: self.measure_density(ix),
            discharged,
        })
    }

    /// Forgets exit records older than `keep` seconds.
    pub fn prune_exit_log(&mut self, keep: f64) {
        let cutoff = self.time() - keep;
        for log in &mut self.exit_log {
            let first = log.partition_point(|r| r.t <= cutoff);
            log.drain(..first);
        }
    }
}

fn choose_side(row: &[f64; 4], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (side, &p) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = side;
        if u < acc {
            return side;
        }
    }
    last
}
