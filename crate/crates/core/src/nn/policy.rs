//! Factored categorical policy: four independent 9-way heads.

use rand::Rng;

pub const HEADS: usize = 4;
pub const CHOICES: usize = 9;

pub type Logits = [[f64; CHOICES]; HEADS];

pub fn softmax(z: &[f64; CHOICES]) -> [f64; CHOICES] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = z.map(|x| (x - m).exp());
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

pub fn log_softmax(z: &[f64; CHOICES]) -> [f64; CHOICES] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    z.map(|x| x - lse)
}

fn head_entropy(z: &[f64; CHOICES]) -> f64 {
    let p = softmax(z);
    let lp = log_softmax(z);
    -p.iter().zip(&lp).map(|(p, l)| if *p > 0.0 { p * l } else { 0.0 }).sum::<f64>()
}

/// Sum of per-head entropies.
pub fn entropy(logits: &Logits) -> f64 {
    logits.iter().map(head_entropy).sum()
}

/// Joint log-probability: sum of the per-head log-probabilities.
pub fn log_prob(logits: &Logits, indices: &[usize; HEADS]) -> f64 {
    logits.iter().zip(indices).map(|(z, &a)| log_softmax(z)[a]).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSample {
    pub indices: [usize; HEADS],
    pub log_prob: f64,
    pub entropy: f64,
}

pub fn sample_action<R: Rng + ?Sized>(logits: &Logits, rng: &mut R) -> ActionSample {
    let mut indices = [0usize; HEADS];
    for (h, z) in logits.iter().enumerate() {
        let p = softmax(z);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        indices[h] = CHOICES - 1;
        for (k, pk) in p.iter().enumerate() {
            acc += pk;
            if u < acc {
                indices[h] = k;
                break;
            }
        }
    }
    ActionSample { indices, log_prob: log_prob(logits, &indices), entropy: entropy(logits) }
}

/// Most probable index on every head (lowest index on ties).
pub fn greedy_action(logits: &Logits) -> ActionSample {
    let indices = logits.map(|z| {
        let mut best = 0;
        for k in 1..CHOICES {
            if z[k] > z[best] {
                best = k;
            }
        }
        best
    });
    ActionSample { indices, log_prob: log_prob(logits, &indices), entropy: entropy(logits) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_entropy() {
        let e = entropy(&[[0.0; CHOICES]; HEADS]);
        assert!((e - 4.0 * 9f64.ln()).abs() < 1e-12);
        assert!((e - 8.789).abs() < 1e-3);
    }

    #[test]
    fn saturated_logits_pick_the_spike() {
        let mut z = [[0.0; CHOICES]; HEADS];
        for head in &mut z {
            head[2] = 1000.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let a = sample_action(&z, &mut rng);
            assert_eq!(a.indices, [2; 4]);
            assert!(a.log_prob > -1e-12);
        }
    }

    #[test]
    fn softmax_stays_normalised_for_extreme_logits() {
        let z = [-700.0, 700.0, 0.0, 1e-300, -1e300, 5.0, 3.0, 2.0, 1.0];
        let p = softmax(&z);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|x| x.is_finite()));
    }
}
