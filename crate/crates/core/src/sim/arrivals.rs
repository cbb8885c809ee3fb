//! External vehicle arrival processes for boundary sections.
//!
//! Each boundary section owns an independent generator seeded from the run
//! seed and the section index, so the arrival stream of a seed never depends
//! on the signal decisions taken during the run.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::SimError;

/// Draws one Weibull inter-arrival time, `scale * (-ln U)^(1/shape)`.
pub fn sample_interarrival<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> Result<f64, SimError> {
    check_weibull(shape, scale)?;
    let u: f64 = rng.sample(Open01);
    Ok(weibull_quantile(u, shape, scale))
}

/// Inverse-transform map used by [`sample_interarrival`] for a given uniform draw.
pub fn weibull_quantile(u: f64, shape: f64, scale: f64) -> f64 {
    scale * (-u.ln()).powf(1.0 / shape)
}

/// Analytic mean of a Weibull(shape, scale) variable.
pub fn weibull_mean(shape: f64, scale: f64) -> f64 {
    scale * gamma(1.0 + 1.0 / shape)
}

/// Weibull scale giving a mean headway of `1 / rate` seconds.
pub fn weibull_scale_for_rate(rate_veh_per_s: f64, shape: f64) -> f64 {
    1.0 / (rate_veh_per_s * gamma(1.0 + 1.0 / shape))
}

fn check_weibull(shape: f64, scale: f64) -> Result<(), SimError> {
    if !(shape > 0.0 && shape.is_finite()) {
        return Err(SimError::Parameter(format!("Weibull shape must be positive, got {shape}")));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(SimError::Parameter(format!("Weibull scale must be positive, got {scale}")));
    }
    Ok(())
}

/// Demand model of a boundary section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalProcess {
    /// Weibull-distributed headways (seconds).
    Weibull { shape: f64, scale: f64 },
    /// Constant headway; the first vehicle arrives at `offset` seconds.
    Deterministic {
        headway: f64,
        #[serde(default)]
        offset: f64,
    },
}

impl ArrivalProcess {
    pub fn validate(&self) -> Result<(), SimError> {
        match *self {
            ArrivalProcess::Weibull { shape, scale } => check_weibull(shape, scale),
            ArrivalProcess::Deterministic { headway, offset } => {
                if !(headway > 0.0 && headway.is_finite()) || !(offset >= 0.0 && offset.is_finite()) {
                    return Err(SimError::Parameter(format!(
                        "deterministic arrivals need headway > 0 and offset >= 0, got {headway}/{offset}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Long-run arrival rate in vehicles per second.
    pub fn rate(&self) -> f64 {
        match *self {
            ArrivalProcess::Weibull { shape, scale } => 1.0 / weibull_mean(shape, scale),
            ArrivalProcess::Deterministic { headway, .. } => 1.0 / headway,
        }
    }
}

/// Lazily pre-drawn arrival schedule of one boundary section.
#[derive(Debug, Clone)]
pub(crate) struct ArrivalStream {
    process: ArrivalProcess,
    rng: ChaCha8Rng,
    next_time: f64,
    next_route_seed: u64,
}

impl ArrivalStream {
    pub(crate) fn new(process: ArrivalProcess, run_seed: u64, section_index: usize) -> Self {
        let stream_seed = splitmix64(run_seed ^ splitmix64(0xA11C_E5ED_u64.wrapping_add(section_index as u64)));
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
        let first = match process {
            ArrivalProcess::Weibull { shape, scale } => weibull_quantile(rng.sample(Open01), shape, scale),
            ArrivalProcess::Deterministic { offset, .. } => offset,
        };
        let next_route_seed = rng.gen();
        Self { process, rng, next_time: first, next_route_seed }
    }

    pub(crate) fn peek(&self) -> f64 {
        self.next_time
    }

    /// Pops the pending arrival, returning (arrival time, route seed).
    pub(crate) fn pop(&mut self) -> (f64, u64) {
        let out = (self.next_time, self.next_route_seed);
        let gap = match self.process {
            ArrivalProcess::Weibull { shape, scale } => weibull_quantile(self.rng.sample(Open01), shape, scale),
            ArrivalProcess::Deterministic { headway, .. } => headway,
        };
        self.next_time += gap;
        self.next_route_seed = self.rng.gen();
        out
    }
}

/// SplitMix64 finaliser; used to derive independent sub-seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in [0, 1) derived from a vehicle's route seed and hop count.
pub(crate) fn route_uniform(route_seed: u64, hop: u32) -> f64 {
    (splitmix64(route_seed.wrapping_add(hop as u64)) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_one_is_exponential_quantile() {
        let u = (-1.0f64).exp();
        assert_eq!(weibull_quantile(u, 1.0, 10.0), 10.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(sample_interarrival(&mut rng, 0.0, 10.0), Err(SimError::Parameter(_))));
        assert!(matches!(sample_interarrival(&mut rng, 2.0, -1.0), Err(SimError::Parameter(_))));
        assert!(sample_interarrival(&mut rng, 2.0, 10.0).unwrap() > 0.0);
    }

    #[test]
    fn scale_for_rate_round_trips() {
        let scale = weibull_scale_for_rate(0.05, 2.0);
        let p = ArrivalProcess::Weibull { shape: 2.0, scale };
        assert!((p.rate() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn stream_is_reproducible_and_increasing() {
        let p = ArrivalProcess::Weibull { shape: 2.0, scale: 10.0 };
        let mut a = ArrivalStream::new(p, 42, 3);
        let mut b = ArrivalStream::new(p, 42, 3);
        let mut last = 0.0;
        for _ in 0..100 {
            let x = a.pop();
            assert_eq!(x, b.pop());
            assert!(x.0 > last);
            last = x.0;
        }
        let mut c = ArrivalStream::new(p, 42, 4);
        assert_ne!(c.pop().0, ArrivalStream::new(p, 42, 3).pop().0);
    }

    #[test]
    fn route_uniform_in_unit_interval() {
        for s in 0..1000u64 {
            let u = route_uniform(s * 7919, (s % 5) as u32);
            assert!((0.0..1.0).contains(&u));
        }
    }
}
