//! Observation encoders.
//!
//! A single intersection is observed as the 8-vector `[densities / max, phase one-hot]`.
//! In multi-agent settings an intersection sees a 4x8 matrix: its own row
//! followed by up to three neighbour rows in configured order, zero-padded.

use thiserror::Error;

use crate::sim::Network;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodingError {
    #[error("phase index {0} out of range 0..3")]
    PhaseOutOfRange(usize),
    #[error("density must be non-negative and finite, got {0}")]
    NegativeDensity(f64),
}

pub const SINGLE_LEN: usize = 8;
pub const MATRIX_ROWS: usize = 4;
pub const MATRIX_COLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseOneHot {
    bits: [u8; 4],
}

impl PhaseOneHot {
    pub fn bits(&self) -> [u8; 4] {
        self.bits
    }

    pub fn index(&self) -> usize {
        self.bits.iter().position(|&b| b == 1).expect("one-hot has a set bit")
    }

    pub fn as_f64(&self) -> [f64; 4] {
        self.bits.map(f64::from)
    }
}

pub fn encode_phase(phase_index: usize) -> Result<PhaseOneHot, EncodingError> {
    if phase_index > 3 {
        return Err(EncodingError::PhaseOutOfRange(phase_index));
    }
    let mut bits = [0u8; 4];
    bits[phase_index] = 1;
    Ok(PhaseOneHot { bits })
}

/// Scales densities by their maximum; an all-zero input stays all-zero.
pub fn encode_density(raw: [f64; 4]) -> Result<[f64; 4], EncodingError> {
    if let Some(&bad) = raw.iter().find(|&&d| !(d >= 0.0) || !d.is_finite()) {
        return Err(EncodingError::NegativeDensity(bad));
    }
    let max = raw.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok([0.0; 4]);
    }
    Ok(raw.map(|d| d / max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleObservation {
    pub encoded_density: [f64; 4],
    pub encoded_phase: PhaseOneHot,
}

impl SingleObservation {
    pub fn new(raw_density: [f64; 4], phase_index: usize) -> Result<Self, EncodingError> {
        Ok(Self { encoded_density: encode_density(raw_density)?, encoded_phase: encode_phase(phase_index)? })
    }

    pub fn to_vec(&self) -> [f64; SINGLE_LEN] {
        let mut out = [0.0; SINGLE_LEN];
        out[..4].copy_from_slice(&self.encoded_density);
        out[4..].copy_from_slice(&self.encoded_phase.as_f64());
        out
    }
}

/// Row 0 is the observed intersection; rows 1..3 are neighbours or zero padding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiObservation {
    pub matrix: [[f64; MATRIX_COLS]; MATRIX_ROWS],
}

impl MultiObservation {
    /// Row-major flattening.
    pub fn to_vec(&self) -> [f64; MATRIX_ROWS * MATRIX_COLS] {
        let mut out = [0.0; MATRIX_ROWS * MATRIX_COLS];
        for (r, row) in self.matrix.iter().enumerate() {
            out[r * MATRIX_COLS..(r + 1) * MATRIX_COLS].copy_from_slice(row);
        }
        out
    }

    /// Rows that carry data; padding rows have an all-zero phase block.
    pub fn real_rows(&self) -> usize {
        self.matrix.iter().filter(|r| r[4..].iter().any(|&x| x != 0.0)).count()
    }
}

/// Network input, either variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Single(SingleObservation),
    Multi(MultiObservation),
}

impl Observation {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Observation::Single(o) => o.to_vec().to_vec(),
            Observation::Multi(o) => o.to_vec().to_vec(),
        }
    }
}

pub fn build_single_state(net: &Network, ix: usize) -> Result<SingleObservation, EncodingError> {
    SingleObservation::new(net.measure_density(ix), net.intersection(ix).current_phase())
}

pub fn build_neighbor_matrix(net: &Network, ix: usize) -> Result<MultiObservation, EncodingError> {
    let mut matrix = [[0.0; MATRIX_COLS]; MATRIX_ROWS];
    let rows = std::iter::once(ix).chain(net.topology().neighbor_map[ix].iter().copied());
    for (r, j) in rows.take(MATRIX_ROWS).enumerate() {
        matrix[r] = build_single_state(net, j)?.to_vec();
    }
    Ok(MultiObservation { matrix })
}

/// Matrix containing only the intersection's own row.
pub fn build_isolated_matrix(net: &Network, ix: usize) -> Result<MultiObservation, EncodingError> {
    let mut matrix = [[0.0; MATRIX_COLS]; MATRIX_ROWS];
    matrix[0] = build_single_state(net, ix)?.to_vec();
    Ok(MultiObservation { matrix })
}
