use std::path::Path;

use serde::{Deserialize, Serialize};

use super::A3cError;
use crate::nn::{NetConfig, Variant};
use crate::rewards::{Fusion, RewardConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// One agent on one intersection.
    #[default]
    Single,
    /// One private agent per intersection.
    Inrl,
    /// One shared agent fed by a worker per intersection.
    SharedAsync,
}

impl Regime {
    pub fn variant(&self) -> Variant {
        match self {
            Regime::Single => Variant::Single,
            Regime::Inrl | Regime::SharedAsync => Variant::Multi,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::Single => "single",
            Regime::Inrl => "inrl",
            Regime::SharedAsync => "shared_async",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = A3cError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Regime::Single),
            "inrl" => Ok(Regime::Inrl),
            "shared_async" => Ok(Regime::SharedAsync),
            _ => Err(A3cError::Config(format!("unknown regime '{s}' (single|inrl|shared_async)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    /// Decision epochs per gradient update.
    pub t_max: usize,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
    pub learning_rate: f64,
    pub grad_clip_norm: f64,
    pub rms_decay: f64,
    pub rms_epsilon: f64,
    /// Parallel environment instances. Each hosts one worker per controlled
    /// intersection; 1 gives a bit-exact reproducible run.
    pub num_workers: usize,
    /// Decision epochs per worker.
    pub total_epochs: u64,
    pub regime: Regime,
    pub coordination: Fusion,
    pub seed: u64,
    /// Controlled intersections; empty means all of the scenario's.
    pub intersections: Vec<String>,
    /// Training episode length in seconds; defaults to the scenario's.
    pub episode_duration: Option<f64>,
    /// Green period of the fixed-time plan run by uncontrolled intersections.
    pub uncontrolled_fst: u32,
    /// Metrics sampling window, seconds.
    pub metrics_window: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            t_max: 8,
            entropy_coeff: 0.01,
            value_coeff: 0.5,
            learning_rate: 1e-4,
            grad_clip_norm: 40.0,
            rms_decay: 0.99,
            rms_epsilon: 1e-5,
            num_workers: 1,
            total_epochs: 3000,
            regime: Regime::Single,
            coordination: Fusion::Off,
            seed: 0,
            intersections: Vec::new(),
            episode_duration: None,
            uncontrolled_fst: 60,
            metrics_window: 90.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), A3cError> {
        let bad = |m: String| Err(A3cError::Config(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if self.t_max == 0 {
            return bad("t_max must be at least 1".into());
        }
        if !(self.entropy_coeff >= 0.0) {
            return bad(format!("entropy_coeff must be >= 0, got {}", self.entropy_coeff));
        }
        if !(self.value_coeff > 0.0) {
            return bad(format!("value_coeff must be > 0, got {}", self.value_coeff));
        }
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if !(self.grad_clip_norm > 0.0) {
            return bad(format!("grad_clip_norm must be > 0, got {}", self.grad_clip_norm));
        }
        if !(self.rms_decay >= 0.0 && self.rms_decay < 1.0) || !(self.rms_epsilon > 0.0) {
            return bad("rms_decay must be in [0, 1) and rms_epsilon > 0".into());
        }
        if self.num_workers == 0 {
            return bad("num_workers must be at least 1".into());
        }
        if self.uncontrolled_fst == 0 {
            return bad("uncontrolled_fst must be positive".into());
        }
        if !(self.metrics_window > 0.0) {
            return bad("metrics_window must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InrlConfig {
    /// Whether independent agents see their neighbours' rows.
    pub observe_neighbors: bool,
}

impl Default for InrlConfig {
    fn default() -> Self {
        Self { observe_neighbors: true }
    }
}

/// Everything a training run is configured by; loadable from TOML.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub nn: NetConfig,
    pub reward: RewardConfig,
    pub inrl: InrlConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, A3cError> {
        toml::from_str(text).map_err(|e| A3cError::Config(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, A3cError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| A3cError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Reconciles the two coordination switches and fixes the network variant
    /// from the regime.
    pub fn resolved(mut self) -> Result<Self, A3cError> {
        let on = self.train.coordination == Fusion::On || self.reward.global_fusion == Fusion::On;
        let fusion = if on { Fusion::On } else { Fusion::Off };
        self.train.coordination = fusion;
        self.reward.global_fusion = fusion;
        self.nn.variant = self.train.regime.variant();
        self.train.validate()?;
        self.nn.validate()?;
        if !(0.0..=1.0).contains(&self.reward.global_weight) {
            return Err(A3cError::Config(format!("global_weight must be in [0, 1], got {}", self.reward.global_weight)));
        }
        Ok(self)
    }

    pub fn coordination(&self) -> bool {
        self.train.coordination == Fusion::On
    }
}
