//! Declarative experiments: several controllers on one scenario and one seed list.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::summary::{summarize, write_summary_csv, SummaryRow};
use super::{evaluate_episode, resolve, Controller, EpisodeResult, EvalOptions, HarnessError, PolicyController};
use crate::sim::metrics::write_csv;
use crate::sim::{ScenarioConfig, SignalPlan};

fn default_window() -> f64 {
    90.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Built-in scenario name or scenario file, relative to the spec file.
    pub scenario: String,
    pub seeds: Vec<u64>,
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default)]
    pub episode_duration: Option<f64>,
    /// Label of the run percent changes are measured against; the first run by default.
    #[serde(default)]
    pub reference: Option<String>,
    /// Policies pick their most probable action.
    #[serde(default = "default_true")]
    pub greedy: bool,
    pub runs: Vec<RunSpec>,
}

/// One controller. Exactly one of `fst`, `plan` and `checkpoint` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub label: String,
    #[serde(default)]
    pub fst: Option<i64>,
    #[serde(default)]
    pub plan: Option<[u32; 4]>,
    /// Checkpoint file or training output directory.
    #[serde(default)]
    pub checkpoint: Option<String>,
    /// Must equal the experiment's seed list when given.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Spec(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Missing(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn reference_label(&self) -> &str {
        self.reference.as_deref().unwrap_or_else(|| self.runs.first().map_or("", |r| r.label.as_str()))
    }

    /// Structural checks that need no file access.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Spec(m));
        if self.seeds.is_empty() {
            return bad("seed list is empty".into());
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seed list has duplicates".into());
        }
        if !(self.window > 0.0) {
            return bad(format!("window must be positive, got {}", self.window));
        }
        if self.runs.is_empty() {
            return bad("no runs".into());
        }
        let mut labels = BTreeSet::new();
        for r in &self.runs {
            if r.label.is_empty() || !r.label.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                return bad(format!("run label '{}' must be non-empty and use only letters, digits, '-', '_' or '.'", r.label));
            }
            if !labels.insert(r.label.as_str()) {
                return bad(format!("duplicate run label '{}'", r.label));
            }
            let kinds = r.fst.is_some() as u8 + r.plan.is_some() as u8 + r.checkpoint.is_some() as u8;
            if kinds != 1 {
                return bad(format!("run '{}' needs exactly one of fst, plan, checkpoint", r.label));
            }
            if let Some(s) = &r.seeds {
                if *s != self.seeds {
                    return bad(format!("run '{}' has its own seed list; all runs must share {:?}", r.label, self.seeds));
                }
            }
        }
        if !labels.contains(self.reference_label()) {
            return bad(format!("reference '{}' is not a run label", self.reference_label()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub rows: Vec<SummaryRow>,
    /// Per run, results in seed-list order.
    pub results: Vec<(String, Vec<EpisodeResult>)>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    spec: &'a ExperimentSpec,
    /// Directory relative spec paths were resolved against.
    base_dir: String,
    scenario: &'a str,
    intersection_ids: &'a [String],
    arrival_digests: Vec<(u64, &'a str)>,
    runs: Vec<ManifestRun<'a>>,
}

#[derive(Serialize)]
struct ManifestRun<'a> {
    label: &'a str,
    per_seed: Vec<(u64, f64, f64)>,
    plans_emitted: u64,
    plan_violations: u64,
}

fn resolve_scenario(spec: &ExperimentSpec, base: &Path) -> Result<ScenarioConfig, HarnessError> {
    let local = resolve(base, &spec.scenario);
    let found = if local.is_file() { ScenarioConfig::load(&local.to_string_lossy()) } else { ScenarioConfig::load(&spec.scenario) };
    found.map_err(|e| HarnessError::Missing(format!("scenario '{}': {e}", spec.scenario)))
}

fn resolve_controller(run: &RunSpec, spec: &ExperimentSpec, base: &Path, scenario: &ScenarioConfig) -> Result<Controller, HarnessError> {
    if let Some(p) = run.fst {
        return Controller::fst(p);
    }
    if let Some(g) = run.plan {
        return Ok(Controller::Fixed(SignalPlan::new(g)?));
    }
    let path = resolve(base, run.checkpoint.as_deref().expect("validated"));
    if !path.exists() {
        return Err(HarnessError::Missing(format!("checkpoint '{}' of run '{}'", path.display(), run.label)));
    }
    let mut pc = PolicyController::load(&path, scenario)?;
    pc.greedy = spec.greedy;
    Ok(Controller::Policy(pc))
}

/// Runs every (run, seed) pair and writes `runs/<label>/seed_<n>.csv`,
/// `summary.csv` and `manifest.json` under `out`. Relative paths in the
/// spec are resolved against `base`. All inputs are checked before any
/// episode starts.
pub fn run_experiment(spec: &ExperimentSpec, base: &Path, out: &Path) -> Result<ExperimentReport, HarnessError> {
    spec.validate()?;
    let scenario = resolve_scenario(spec, base)?;
    let controllers: Vec<Controller> =
        spec.runs.iter().map(|r| resolve_controller(r, spec, base, &scenario)).collect::<Result<_, _>>()?;
    let opts = EvalOptions { window: spec.window, episode_duration: spec.episode_duration, ..EvalOptions::default() };

    let tasks: Vec<(usize, usize)> =
        (0..controllers.len()).flat_map(|r| (0..spec.seeds.len()).map(move |s| (r, s))).collect();
    let slots: Mutex<Vec<Option<Result<EpisodeResult, HarnessError>>>> = Mutex::new((0..tasks.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(tasks.len());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(r, k)) = tasks.get(i) else { break };
                let res = evaluate_episode(&scenario, &controllers[r], spec.seeds[k], &opts);
                slots.lock().expect("slots lock")[i] = Some(res);
            });
        }
    });
    let mut flat = slots.into_inner().expect("slots lock").into_iter().map(|r| r.expect("task ran"));
    let mut results = Vec::new();
    for run in &spec.runs {
        let per_seed = (0..spec.seeds.len()).map(|_| flat.next().expect("one result per task")).collect::<Result<Vec<_>, _>>()?;
        results.push((run.label.clone(), per_seed));
    }

    let digests: Vec<&str> = results[0].1.iter().map(|r| r.arrival_digest.as_deref().unwrap_or("")).collect();
    for (label, per_seed) in &results[1..] {
        for (k, r) in per_seed.iter().enumerate() {
            if r.arrival_digest.as_deref().unwrap_or("") != digests[k] {
                return Err(HarnessError::Pairing(format!(
                    "run '{label}' saw different arrivals than '{}' on seed {}",
                    results[0].0, spec.seeds[k]
                )));
            }
        }
    }

    let averages: Vec<(String, Vec<(f64, f64)>)> =
        results.iter().map(|(l, v)| (l.clone(), v.iter().map(|r| (r.avg_delay, r.avg_density)).collect())).collect();
    let rows = summarize(&averages, spec.reference_label())?;

    let ids = results[0].1[0].intersection_ids.clone();
    for (label, per_seed) in &results {
        let dir = out.join("runs").join(label);
        fs::create_dir_all(&dir)?;
        for r in per_seed {
            let f = fs::File::create(dir.join(format!("seed_{}.csv", r.seed)))?;
            write_csv(f, &ids, &r.samples).map_err(|e| HarnessError::Format(e.to_string()))?;
        }
    }
    write_summary_csv(&out.join("summary.csv"), &rows)?;
    let manifest = Manifest {
        spec,
        base_dir: std::path::absolute(if base.as_os_str().is_empty() { Path::new(".") } else { base })?
            .to_string_lossy()
            .into_owned(),
        scenario: &scenario.name,
        intersection_ids: &ids,
        arrival_digests: spec.seeds.iter().copied().zip(digests.iter().copied()).collect(),
        runs: results
            .iter()
            .map(|(label, v)| ManifestRun {
                label,
                per_seed: v.iter().map(|r| (r.seed, r.avg_delay, r.avg_density)).collect(),
                plans_emitted: v.iter().map(|r| r.plans_emitted).sum(),
                plan_violations: v.iter().map(|r| r.plan_violations).sum(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| HarnessError::Format(e.to_string()))?;
    fs::write(out.join("manifest.json"), json + "\n")?;
    Ok(ExperimentReport { rows, results })
}

/// Loads a TOML spec, or the `manifest.json` of an earlier experiment, and
/// runs it. TOML paths are relative to the file; a manifest carries its own base.
pub fn run_experiment_file(path: &Path, out: &Path) -> Result<ExperimentReport, HarnessError> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::Missing(format!("{}: {e}", path.display())))?;
        #[derive(Deserialize)]
        struct Saved {
            spec: ExperimentSpec,
            base_dir: PathBuf,
        }
        let saved: Saved = serde_json::from_str(&text).map_err(|e| HarnessError::Format(format!("{}: {e}", path.display())))?;
        return run_experiment(&saved.spec, &saved.base_dir, out);
    }
    let spec = ExperimentSpec::load(path)?;
    let base: PathBuf = path.parent().map(Path::to_path_buf).unwrap_or_default();
    run_experiment(&spec, &base, out)
}
