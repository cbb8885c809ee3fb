//! Central finite-difference verification of [`PolicyValueNet::backward`].

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::net::{HeadGrads, PolicyValueNet, RecurrentState, StepOutput};
use super::policy::{entropy, log_prob, log_softmax, softmax, CHOICES, HEADS};
use super::tensor::GradientSet;
use super::NnError;

/// A scalar loss over a sequence of network outputs, with its gradient.
pub trait SequenceLoss {
    fn loss(&self, outputs: &[StepOutput]) -> f64;
    fn output_grads(&self, outputs: &[StepOutput]) -> Vec<HeadGrads>;
}

/// `-sum_t A_t log pi(a_t)` with the advantages held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradientLoss {
    pub actions: Vec<[usize; HEADS]>,
    pub advantages: Vec<f64>,
}

impl SequenceLoss for PolicyGradientLoss {
    fn loss(&self, outputs: &[StepOutput]) -> f64 {
        outputs.iter().zip(&self.actions).zip(&self.advantages).map(|((o, a), adv)| -adv * log_prob(&o.logits, a)).sum()
    }

    fn output_grads(&self, outputs: &[StepOutput]) -> Vec<HeadGrads> {
        outputs
            .iter()
            .zip(&self.actions)
            .zip(&self.advantages)
            .map(|((o, a), &adv)| HeadGrads { dlogits: log_prob_grad(&o.logits, a, -adv), dvalue: 0.0 })
            .collect()
    }
}

/// `sum_t (R_t - V_t)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueLoss {
    pub targets: Vec<f64>,
}

impl SequenceLoss for ValueLoss {
    fn loss(&self, outputs: &[StepOutput]) -> f64 {
        outputs.iter().zip(&self.targets).map(|(o, r)| (r - o.value).powi(2)).sum()
    }

    fn output_grads(&self, outputs: &[StepOutput]) -> Vec<HeadGrads> {
        outputs
            .iter()
            .zip(&self.targets)
            .map(|(o, r)| HeadGrads { dvalue: -2.0 * (r - o.value), ..HeadGrads::zero() })
            .collect()
    }
}

/// `scale * d log pi(a) / d logits` = `scale * (onehot(a) - p)` per head.
pub fn log_prob_grad(logits: &[[f64; CHOICES]; HEADS], action: &[usize; HEADS], scale: f64) -> [[f64; CHOICES]; HEADS] {
    let mut out = [[0.0; CHOICES]; HEADS];
    for h in 0..HEADS {
        let p = softmax(&logits[h]);
        for j in 0..CHOICES {
            let onehot = if j == action[h] { 1.0 } else { 0.0 };
            out[h][j] = scale * (onehot - p[j]);
        }
    }
    out
}

/// `scale * d H / d logits` where `H` is the summed per-head entropy.
pub fn entropy_grad(logits: &[[f64; CHOICES]; HEADS], scale: f64) -> [[f64; CHOICES]; HEADS] {
    let mut out = [[0.0; CHOICES]; HEADS];
    for h in 0..HEADS {
        let p = softmax(&logits[h]);
        let lp = log_softmax(&logits[h]);
        let head_h: f64 = -p.iter().zip(&lp).map(|(a, b)| a * b).sum::<f64>();
        for j in 0..CHOICES {
            out[h][j] = -scale * p[j] * (lp[j] + head_h);
        }
    }
    out
}

/// Entropy of a single step, re-exported for loss implementations.
pub fn step_entropy(o: &StepOutput) -> f64 {
    entropy(&o.logits)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Denominator floor of the relative error, so near-zero gradients are
    /// judged by absolute error.
    pub floor: f64,
    /// Check a random subset of this many coordinates per tensor instead of all.
    pub max_coords_per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: 1e-5, floor: 1e-5, max_coords_per_tensor: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Flat index of the worst coordinate.
    pub worst_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorReport>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn checked(&self) -> usize {
        self.tensors.iter().map(|t| t.checked).sum()
    }

    pub fn worst(&self) -> Option<&TensorReport> {
        self.tensors.iter().max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

fn rel_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Analytic gradient of `loss` through `net` over `inputs` from `init`.
pub fn analytic_gradient(
    net: &PolicyValueNet,
    inputs: &[Vec<f64>],
    init: &RecurrentState,
    loss: &dyn SequenceLoss,
) -> Result<GradientSet, NnError> {
    let tape = net.forward_sequence(inputs, init)?;
    net.backward(&tape, &loss.output_grads(&tape.outputs))
}

fn coordinates(len: usize, opts: &GradCheckOptions, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match opts.max_coords_per_tensor {
        Some(m) if m < len => {
            let mut v = sample(rng, len, m).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..len).collect(),
    }
}

/// Compares an analytic gradient against central differences of `loss`.
pub fn compare_gradients(
    net: &PolicyValueNet,
    inputs: &[Vec<f64>],
    init: &RecurrentState,
    loss: &dyn SequenceLoss,
    analytic: &GradientSet,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, NnError> {
    analytic.check_against(net.params())?;
    let mut probe = net.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let eval = |n: &PolicyValueNet| -> Result<f64, NnError> {
        Ok(loss.loss(&n.forward_sequence(inputs, init)?.outputs))
    };
    let mut tensors = Vec::new();
    for k in 0..net.params().tensors.len() {
        let coords = coordinates(net.params().tensors[k].len(), opts, &mut rng);
        let mut rep = TensorReport {
            name: net.param_names()[k].clone(),
            checked: coords.len(),
            max_rel_error: 0.0,
            max_abs_error: 0.0,
            worst_index: 0,
        };
        for &i in &coords {
            let orig = probe.tensors_mut()[k].data()[i];
            probe.tensors_mut()[k].data_mut()[i] = orig + opts.step;
            let plus = eval(&probe)?;
            probe.tensors_mut()[k].data_mut()[i] = orig - opts.step;
            let minus = eval(&probe)?;
            probe.tensors_mut()[k].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = analytic.tensors[k].data()[i];
            let rel = rel_error(a, numeric, opts.floor);
            rep.max_abs_error = rep.max_abs_error.max((a - numeric).abs());
            if rel > rep.max_rel_error {
                rep.max_rel_error = rel;
                rep.worst_index = i;
            }
        }
        tensors.push(rep);
    }
    Ok(GradCheckReport { tensors })
}

/// Backpropagated gradient of `loss` checked against central differences.
pub fn grad_check(
    net: &PolicyValueNet,
    inputs: &[Vec<f64>],
    init: &RecurrentState,
    loss: &dyn SequenceLoss,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, NnError> {
    let analytic = analytic_gradient(net, inputs, init, loss)?;
    compare_gradients(net, inputs, init, loss, &analytic, opts)
}
