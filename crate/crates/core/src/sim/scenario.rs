//! Scenario files and topology validation.
//!
//! A scenario is a TOML document with a `[sim]` table, a list of `[[sections]]`
//! and a list of `[[intersections]]`. Approaches are always listed in the
//! order Upper, Right, Lower, Left; outbound links use the same side order and
//! an empty string means the vehicle leaves the network.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::arrivals::{weibull_scale_for_rate, ArrivalProcess};
use super::SimError;

/// Time-stepping and signal parameters of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Seconds per step.
    pub timestep: f64,
    /// Vehicles per second of green, per approach.
    pub saturation_flow: f64,
    /// All-red seconds after every phase.
    pub intergreen: f64,
    /// Episode length in seconds.
    pub episode_duration: f64,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { timestep: 1.0, saturation_flow: 0.5, intergreen: 0.0, episode_duration: 3600.0, rng_seed: 0 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.timestep > 0.0 && self.timestep.is_finite()) {
            return Err(SimError::Config(format!("timestep must be > 0, got {}", self.timestep)));
        }
        if !(self.saturation_flow > 0.0 && self.saturation_flow.is_finite()) {
            return Err(SimError::Config(format!("saturation_flow must be > 0, got {}", self.saturation_flow)));
        }
        if !(self.intergreen >= 0.0) || !is_multiple(self.intergreen, self.timestep) {
            return Err(SimError::Config(format!(
                "intergreen must be a non-negative multiple of the timestep, got {}",
                self.intergreen
            )));
        }
        if !(self.episode_duration > 0.0) || !is_multiple(self.episode_duration, self.timestep) {
            return Err(SimError::Config(format!(
                "episode_duration must be a positive multiple of the timestep, got {}",
                self.episode_duration
            )));
        }
        Ok(())
    }

    pub fn episode_steps(&self) -> u64 {
        (self.episode_duration / self.timestep).round() as u64
    }

    /// Number of steps covering `seconds`; errors unless it is a whole multiple.
    pub fn steps_for(&self, seconds: f64) -> Result<u64, SimError> {
        if seconds < 0.0 || !is_multiple(seconds, self.timestep) {
            return Err(SimError::Config(format!(
                "duration {seconds} s is not a non-negative multiple of the {} s timestep",
                self.timestep
            )));
        }
        Ok((seconds / self.timestep).round() as u64)
    }
}

fn is_multiple(x: f64, step: f64) -> bool {
    let k = (x / step).round();
    (k * step - x).abs() <= 1e-9 * step.max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionConfig {
    pub id: String,
    pub length_km: f64,
    pub free_flow_kmh: f64,
    /// Present only on boundary sections fed by external demand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival: Option<ArrivalProcess>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionConfig {
    pub id: String,
    /// Inbound sections, ordered Upper, Right, Lower, Left.
    pub approaches: [String; 4],
    /// Section reached when leaving towards each side; "" exits the network.
    #[serde(default = "exit_everywhere")]
    pub outbound: [String; 4],
    /// Row i: fractions of approach i's traffic sent to each outbound side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_matrix: Option<[[f64; 4]; 4]>,
    /// Ordered neighbour list; the order fixes the observation matrix rows.
    #[serde(default)]
    pub neighbors: Vec<String>,
}

fn exit_everywhere() -> [String; 4] {
    Default::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub sim: SimConfig,
    pub sections: Vec<SectionConfig>,
    pub intersections: Vec<IntersectionConfig>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Config(format!("scenario parse error: {e}")))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }

    /// Loads a scenario file, falling back to a built-in name when no such file exists.
    pub fn load(path_or_name: &str) -> Result<Self, SimError> {
        let path = Path::new(path_or_name);
        if path.is_file() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
            return Self::from_toml_str(&text);
        }
        builtin(path_or_name.trim_start_matches("builtin:"))
            .ok_or_else(|| SimError::Config(format!("no scenario file or built-in named '{path_or_name}'")))
    }

    /// Keeps only the given neighbour relations; used to build restricted variants.
    pub fn set_neighbors(&mut self, id: &str, neighbors: &[&str]) {
        if let Some(ix) = self.intersections.iter_mut().find(|i| i.id == id) {
            ix.neighbors = neighbors.iter().map(|s| s.to_string()).collect();
        }
    }

    /// Replaces the arrival process of a section.
    pub fn set_arrival(&mut self, section: &str, arrival: Option<ArrivalProcess>) {
        if let Some(s) = self.sections.iter_mut().find(|s| s.id == section) {
            s.arrival = arrival;
        }
    }
}

/// Static per-section data of a validated topology.
#[derive(Debug, Clone, PartialEq)]
pub struct SectionSpec {
    pub id: String,
    pub length_km: f64,
    pub free_flow_kmh: f64,
    pub arrival: Option<ArrivalProcess>,
    /// Intersection whose approach this section is, and the approach slot.
    pub downstream: (usize, usize),
    /// Intersection feeding this section, if any.
    pub upstream: Option<usize>,
}

impl SectionSpec {
    /// Free-flow traversal time in seconds.
    pub fn ideal_travel_time(&self) -> f64 {
        self.length_km / self.free_flow_kmh * 3600.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionSpec {
    pub id: String,
    pub approaches: [usize; 4],
    pub outbound: [Option<usize>; 4],
    pub turn_matrix: [[f64; 4]; 4],
}

/// Validated road network: intersections, sections and the neighbour map.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    pub name: String,
    pub sections: Vec<SectionSpec>,
    pub intersections: Vec<IntersectionSpec>,
    /// Per intersection, neighbour indices in configured order.
    pub neighbor_map: Vec<Vec<usize>>,
    /// Sections fed by external arrivals.
    pub boundary_sections: Vec<usize>,
}

impl NetworkTopology {
    pub fn intersection_index(&self, id: &str) -> Option<usize> {
        self.intersections.iter().position(|i| i.id == id)
    }

    pub fn intersection_ids(&self) -> Vec<String> {
        self.intersections.iter().map(|i| i.id.clone()).collect()
    }
}

/// Default routing: a third of the traffic to each side other than the one it came from.
pub fn default_turn_matrix() -> [[f64; 4]; 4] {
    let mut m = [[1.0 / 3.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    m
}

/// Validates a scenario and resolves names to indices.
pub fn build_network(cfg: &ScenarioConfig) -> Result<NetworkTopology, SimError> {
    cfg.sim.validate()?;
    if cfg.intersections.is_empty() {
        return Err(SimError::Config(format!("scenario '{}' names no intersections", cfg.name)));
    }
    let mut section_index = HashMap::new();
    for (k, s) in cfg.sections.iter().enumerate() {
        if section_index.insert(s.id.as_str(), k).is_some() {
            return Err(SimError::Config(format!("section '{}' defined twice", s.id)));
        }
        if !(s.length_km > 0.0 && s.length_km.is_finite()) {
            return Err(SimError::Config(format!("section '{}' length must be > 0", s.id)));
        }
        if !(s.free_flow_kmh > 0.0 && s.free_flow_kmh.is_finite()) {
            return Err(SimError::Config(format!("section '{}' free-flow speed must be > 0", s.id)));
        }
        if let Some(a) = &s.arrival {
            a.validate().map_err(|e| SimError::Config(format!("section '{}': {e}", s.id)))?;
        }
    }
    let mut ix_index = HashMap::new();
    for (k, ix) in cfg.intersections.iter().enumerate() {
        if ix_index.insert(ix.id.as_str(), k).is_some() {
            return Err(SimError::Config(format!("intersection '{}' defined twice", ix.id)));
        }
    }

    let lookup = |ix: &str, what: &str, name: &str| -> Result<usize, SimError> {
        section_index.get(name).copied().ok_or_else(|| {
            SimError::Config(format!("intersection '{ix}' {what} references undefined section '{name}'"))
        })
    };

    let mut downstream: Vec<Option<(usize, usize)>> = vec![None; cfg.sections.len()];
    let mut upstream: Vec<Option<usize>> = vec![None; cfg.sections.len()];
    let mut intersections = Vec::with_capacity(cfg.intersections.len());
    for (k, ix) in cfg.intersections.iter().enumerate() {
        let mut approaches = [0usize; 4];
        for (slot, name) in ix.approaches.iter().enumerate() {
            let s = lookup(&ix.id, &format!("approach {slot}"), name)?;
            if downstream[s].is_some() {
                return Err(SimError::Config(format!("section '{name}' is an approach of more than one intersection")));
            }
            downstream[s] = Some((k, slot));
            approaches[slot] = s;
        }
        let mut outbound = [None; 4];
        for (side, name) in ix.outbound.iter().enumerate() {
            if name.is_empty() {
                continue;
            }
            let s = lookup(&ix.id, &format!("outbound {side}"), name)?;
            if let Some(prev) = upstream[s] {
                return Err(SimError::Config(format!(
                    "section '{name}' is fed by both '{}' and '{}'",
                    cfg.intersections[prev].id, ix.id
                )));
            }
            upstream[s] = Some(k);
            outbound[side] = Some(s);
        }
        let turn_matrix = ix.turn_matrix.unwrap_or_else(default_turn_matrix);
        for (r, row) in turn_matrix.iter().enumerate() {
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(SimError::Config(format!("intersection '{}' turn_matrix row {r} has a negative entry", ix.id)));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(SimError::Config(format!(
                    "intersection '{}' turn_matrix row {r} sums to {sum}, expected 1",
                    ix.id
                )));
            }
        }
        intersections.push(IntersectionSpec { id: ix.id.clone(), approaches, outbound, turn_matrix });
    }

    let mut sections = Vec::with_capacity(cfg.sections.len());
    let mut boundary_sections = Vec::new();
    for (k, s) in cfg.sections.iter().enumerate() {
        let Some(ds) = downstream[k] else {
            return Err(SimError::Config(format!("section '{}' is not an approach of any intersection", s.id)));
        };
        if s.arrival.is_some() {
            if let Some(u) = upstream[k] {
                return Err(SimError::Config(format!(
                    "boundary section '{}' is also fed by intersection '{}'",
                    s.id, cfg.intersections[u].id
                )));
            }
            boundary_sections.push(k);
        }
        sections.push(SectionSpec {
            id: s.id.clone(),
            length_km: s.length_km,
            free_flow_kmh: s.free_flow_kmh,
            arrival: s.arrival,
            downstream: ds,
            upstream: upstream[k],
        });
    }

    let mut neighbor_map = Vec::with_capacity(cfg.intersections.len());
    for ix in &cfg.intersections {
        let mut list = Vec::new();
        for n in &ix.neighbors {
            let j = *ix_index.get(n.as_str()).ok_or_else(|| {
                SimError::Config(format!("intersection '{}' lists unknown neighbour '{n}'", ix.id))
            })?;
            if n == &ix.id || list.contains(&j) {
                return Err(SimError::Config(format!("intersection '{}' has an invalid neighbour entry '{n}'", ix.id)));
            }
            list.push(j);
        }
        neighbor_map.push(list);
    }
    for (a, list) in neighbor_map.iter().enumerate() {
        for &b in list {
            if !neighbor_map[b].contains(&a) {
                return Err(SimError::Config(format!(
                    "neighbour map is asymmetric: '{}' lists '{}' but not vice versa",
                    cfg.intersections[a].id, cfg.intersections[b].id
                )));
            }
        }
    }

    let seen: HashSet<usize> = boundary_sections.iter().copied().collect();
    debug_assert_eq!(seen.len(), boundary_sections.len());

    Ok(NetworkTopology { name: cfg.name.clone(), sections, intersections, neighbor_map, boundary_sections })
}

// ---------------------------------------------------------------------------
// Built-in scenarios
// ---------------------------------------------------------------------------

const SECTION_KM: f64 = 0.5;
const FREE_FLOW_KMH: f64 = 50.0;
const WEIBULL_SHAPE: f64 = 2.0;

/// Names accepted by [`builtin`].
pub const BUILTIN_SCENARIOS: &[&str] =
    &["single", "single_asym", "single_asym_det", "bengaluru6", "corridor4"];

fn weibull(rate: f64) -> Option<ArrivalProcess> {
    Some(ArrivalProcess::Weibull { shape: WEIBULL_SHAPE, scale: weibull_scale_for_rate(rate, WEIBULL_SHAPE) })
}

fn section(id: String, arrival: Option<ArrivalProcess>) -> SectionConfig {
    SectionConfig { id, length_km: SECTION_KM, free_flow_kmh: FREE_FLOW_KMH, arrival }
}

fn isolated(name: &str, arrivals: [Option<ArrivalProcess>; 4]) -> ScenarioConfig {
    let sides = ["up", "right", "down", "left"];
    let sections = sides.iter().zip(arrivals).map(|(s, a)| section(format!("A_{s}"), a)).collect();
    ScenarioConfig {
        name: name.to_string(),
        sim: SimConfig::default(),
        sections,
        intersections: vec![IntersectionConfig {
            id: "A".into(),
            approaches: sides.map(|s| format!("A_{s}")),
            outbound: exit_everywhere(),
            turn_matrix: None,
            neighbors: vec![],
        }],
    }
}

/// Mean arrival rates (veh/s) of the asymmetric single-intersection scenarios.
pub const ASYM_RATES: [f64; 4] = [0.15, 0.05, 0.05, 0.05];

/// Returns a built-in scenario by name.
pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    match name {
        "single" => Some(isolated("single", [weibull(0.06); 4])),
        "single_asym" => Some(isolated("single_asym", ASYM_RATES.map(weibull))),
        "single_asym_det" => Some(isolated(
            "single_asym_det",
            ASYM_RATES.map(|r| Some(ArrivalProcess::Deterministic { headway: 1.0 / r, offset: 0.0 })),
        )),
        "bengaluru6" => Some(bengaluru6()),
        "corridor4" => Some(corridor4()),
        _ => None,
    }
}

/// Six intersections A..F: C is linked to B, D and E; D to A, E and C; E to F.
fn bengaluru6() -> ScenarioConfig {
    // (intersection, side) -> neighbour reached through that side. A link X --side--> Y
    // enters Y on the opposite side.
    let links: &[(&str, usize, &str)] = &[
        ("C", 0, "B"),
        ("C", 1, "E"),
        ("C", 2, "D"),
        ("D", 2, "E"),
        ("D", 3, "A"),
        ("E", 1, "F"),
    ];
    let ids = ["A", "B", "C", "D", "E", "F"];
    let neighbors: &[(&str, &[&str])] = &[
        ("A", &["D"]),
        ("B", &["C"]),
        ("C", &["D", "B", "E"]),
        ("D", &["A", "E", "C"]),
        ("E", &["C", "D", "F"]),
        ("F", &["E"]),
    ];
    let mut side_target: HashMap<(&str, usize), &str> = HashMap::new();
    for &(x, side, y) in links {
        side_target.insert((x, side), y);
        side_target.insert((y, (side + 2) % 4), x);
    }
    grid_scenario("bengaluru6", &ids, &side_target, neighbors, |_, _| 0.05, None)
}

/// Four intersections I1..I4 on an east-west arterial with heavy through traffic.
fn corridor4() -> ScenarioConfig {
    let ids = ["I1", "I2", "I3", "I4"];
    let mut side_target: HashMap<(&str, usize), &str> = HashMap::new();
    for w in ids.windows(2) {
        side_target.insert((w[0], 1), w[1]);
        side_target.insert((w[1], 3), w[0]);
    }
    let neighbors: &[(&str, &[&str])] =
        &[("I1", &["I2"]), ("I2", &["I1", "I3"]), ("I3", &["I2", "I4"]), ("I4", &["I3"])];
    // Arterial entries carry three times the side-street demand.
    let rate = |_: &str, side: usize| if side % 2 == 1 { 0.12 } else { 0.04 };
    // Mostly through movements, a few turns.
    let mut turns = [[0.0; 4]; 4];
    for (i, row) in turns.iter_mut().enumerate() {
        row[(i + 2) % 4] = 0.8;
        row[(i + 1) % 4] = 0.1;
        row[(i + 3) % 4] = 0.1;
    }
    let mut cfg = grid_scenario("corridor4", &ids, &side_target, neighbors, rate, Some(turns));
    cfg.sim.episode_duration = 3600.0;
    cfg
}

fn grid_scenario(
    name: &str,
    ids: &[&str],
    side_target: &HashMap<(&str, usize), &str>,
    neighbors: &[(&str, &[&str])],
    rate: impl Fn(&str, usize) -> f64,
    turns: Option<[[f64; 4]; 4]>,
) -> ScenarioConfig {
    let sides = ["up", "right", "down", "left"];
    // Approach on side s of X is named X_s. A vehicle leaving X through side s enters
    // neighbour Y on side s+2.
    let mut sections = Vec::new();
    let mut intersections = Vec::new();
    for &x in ids {
        for (s, side) in sides.iter().enumerate() {
            let fed = side_target.contains_key(&(x, s));
            let arrival = if fed { None } else { weibull(rate(x, s)) };
            sections.push(section(format!("{x}_{side}"), arrival));
        }
        let outbound = [0, 1, 2, 3].map(|s| match side_target.get(&(x, s)) {
            Some(y) => format!("{y}_{}", sides[(s + 2) % 4]),
            None => String::new(),
        });
        let nb = neighbors.iter().find(|(id, _)| *id == x).map(|(_, n)| *n).unwrap_or(&[]);
        intersections.push(IntersectionConfig {
            id: x.to_string(),
            approaches: sides.map(|side| format!("{x}_{side}")),
            outbound,
            turn_matrix: turns,
            neighbors: nb.iter().map(|s| s.to_string()).collect(),
        });
    }
    ScenarioConfig { name: name.to_string(), sim: SimConfig::default(), sections, intersections }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_builtin_shape() {
        let topo = build_network(&builtin("single").unwrap()).unwrap();
        assert_eq!(topo.intersections.len(), 1);
        assert_eq!(topo.boundary_sections.len(), 4);
        assert!(topo.neighbor_map[0].is_empty());
    }

    #[test]
    fn bengaluru6_neighbours() {
        let topo = build_network(&builtin("bengaluru6").unwrap()).unwrap();
        assert_eq!(topo.intersections.len(), 6);
        let c = topo.intersection_index("C").unwrap();
        let names: Vec<&str> = topo.neighbor_map[c].iter().map(|&j| topo.intersections[j].id.as_str()).collect();
        assert_eq!(names, ["D", "B", "E"]);
        let d = topo.intersection_index("D").unwrap();
        let names: Vec<&str> = topo.neighbor_map[d].iter().map(|&j| topo.intersections[j].id.as_str()).collect();
        assert_eq!(names, ["A", "E", "C"]);
    }

    #[test]
    fn every_builtin_validates() {
        for name in BUILTIN_SCENARIOS {
            build_network(&builtin(name).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn non_stochastic_row_is_rejected() {
        let mut cfg = builtin("single").unwrap();
        let mut m = default_turn_matrix();
        m[1] = [0.3, 0.0, 0.3, 0.3];
        cfg.intersections[0].turn_matrix = Some(m);
        let err = build_network(&cfg).unwrap_err().to_string();
        assert!(err.contains("row 1"), "{err}");
        assert!(err.contains("'A'"), "{err}");
    }

    #[test]
    fn missing_section_is_named() {
        let mut cfg = builtin("single").unwrap();
        cfg.intersections[0].approaches[2] = "nowhere".into();
        let err = build_network(&cfg).unwrap_err().to_string();
        assert!(err.contains("nowhere"), "{err}");
    }

    #[test]
    fn asymmetric_adjacency_is_rejected() {
        let mut cfg = builtin("bengaluru6").unwrap();
        cfg.set_neighbors("D", &["A", "E"]);
        let err = build_network(&cfg).unwrap_err().to_string();
        assert!(err.contains("asymmetric"), "{err}");
        cfg.set_neighbors("C", &["B", "E"]);
        build_network(&cfg).unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let cfg = builtin("corridor4").unwrap();
        let text = cfg.to_toml_string();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn sim_config_rejects_fractional_durations() {
        let cfg = SimConfig { episode_duration: 10.5, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = SimConfig { timestep: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
