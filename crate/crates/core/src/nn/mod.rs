//! Small from-scratch policy/value networks in `f64`.
//!
//! Two variants: a linear + LSTM trunk over the 8-vector single-intersection
//! observation, and a Conv-LSTM trunk over the 4x8 neighbour matrix. Both end
//! in four 9-way policy heads and one scalar value head.

pub mod checkpoint;
pub mod gradcheck;
mod layers;
mod net;
pub mod policy;
pub mod tensor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use net::{HeadGrads, PolicyValueNet, RecurrentState, StepOutput, Tape};
pub use policy::{greedy_action, sample_action, softmax, ActionSample, Logits, CHOICES, HEADS};
pub use tensor::{GradientSet, ParameterSet, Tensor};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {layer}: expected {expected:?}, got {actual:?}")]
    Shape { layer: String, expected: Vec<usize>, actual: Vec<usize> },
    #[error("usage error: {0}")]
    Usage(String),
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Single,
    Multi,
}

impl Variant {
    pub fn input_len(&self) -> usize {
        match self {
            Variant::Single => crate::encoding::SINGLE_LEN,
            Variant::Multi => crate::encoding::MATRIX_ROWS * crate::encoding::MATRIX_COLS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub variant: Variant,
    /// LSTM width of the single variant.
    pub hidden: usize,
    /// Hidden channels of the Conv-LSTM.
    pub channels: usize,
    /// Odd square Conv-LSTM kernel, stride 1, same padding.
    pub kernel: usize,
    /// One trunk feeding both heads; `false` gives the critic its own trunk.
    pub shared_trunk: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self { variant: Variant::Single, hidden: 64, channels: 16, kernel: 3, shared_trunk: true }
    }
}

impl NetConfig {
    pub fn single(hidden: usize) -> Self {
        Self { variant: Variant::Single, hidden, ..Self::default() }
    }

    pub fn multi(channels: usize) -> Self {
        Self { variant: Variant::Multi, channels, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        match self.variant {
            Variant::Single if self.hidden == 0 => Err(NnError::Config("hidden must be positive".into())),
            Variant::Multi if self.channels == 0 => Err(NnError::Config("channels must be positive".into())),
            Variant::Multi if self.kernel % 2 == 0 => {
                Err(NnError::Config(format!("kernel must be odd for same padding, got {}", self.kernel)))
            }
            _ => Ok(()),
        }
    }
}
