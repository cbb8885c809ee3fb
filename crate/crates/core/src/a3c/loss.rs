use super::A3cError;
use crate::nn::gradcheck::{entropy_grad, log_prob_grad, SequenceLoss};
use crate::nn::policy::{entropy, log_prob};
use crate::nn::{HeadGrads, StepOutput};

/// n-step returns `R_i = r_i + gamma R_{i+1}` with `R_end = bootstrap`, and
/// advantages `R_i - V_i`. Returns `(returns, advantages)`.
pub fn compute_returns_advantages(
    rewards: &[f64],
    values: &[f64],
    gamma: f64,
    bootstrap: f64,
) -> Result<(Vec<f64>, Vec<f64>), A3cError> {
    if rewards.is_empty() {
        return Err(A3cError::Argument("empty segment".into()));
    }
    if rewards.len() != values.len() {
        return Err(A3cError::Argument(format!("{} rewards but {} values", rewards.len(), values.len())));
    }
    let mut returns = vec![0.0; rewards.len()];
    let mut acc = bootstrap;
    for i in (0..rewards.len()).rev() {
        acc = rewards[i] + gamma * acc;
        returns[i] = acc;
    }
    let advantages = returns.iter().zip(values).map(|(r, v)| r - v).collect();
    Ok((returns, advantages))
}

/// Composite A3C loss over one segment:
/// `-sum A_i log pi(a_i) + value_coeff sum (R_i - V_i)^2 - entropy_coeff sum H_i`,
/// with advantages held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCriticLoss {
    pub actions: Vec<[usize; 4]>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
    pub value_coeff: f64,
    pub entropy_coeff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub policy_loss: f64,
    pub value_loss: f64,
    /// Summed entropy over the segment (before the coefficient).
    pub entropy: f64,
    pub total: f64,
}

pub fn actor_critic_loss(
    actions: Vec<[usize; 4]>,
    returns: Vec<f64>,
    advantages: Vec<f64>,
    value_coeff: f64,
    entropy_coeff: f64,
) -> Result<ActorCriticLoss, A3cError> {
    if actions.len() != returns.len() || returns.len() != advantages.len() {
        return Err(A3cError::Argument(format!(
            "misaligned segment: {} actions, {} returns, {} advantages",
            actions.len(),
            returns.len(),
            advantages.len()
        )));
    }
    Ok(ActorCriticLoss { actions, returns, advantages, value_coeff, entropy_coeff })
}

impl ActorCriticLoss {
    pub fn breakdown(&self, outputs: &[StepOutput]) -> LossBreakdown {
        let mut b = LossBreakdown::default();
        for (i, o) in outputs.iter().enumerate() {
            b.policy_loss -= self.advantages[i] * log_prob(&o.logits, &self.actions[i]);
            b.value_loss += (self.returns[i] - o.value).powi(2);
            b.entropy += entropy(&o.logits);
        }
        b.total = b.policy_loss + self.value_coeff * b.value_loss - self.entropy_coeff * b.entropy;
        b
    }
}

impl SequenceLoss for ActorCriticLoss {
    fn loss(&self, outputs: &[StepOutput]) -> f64 {
        self.breakdown(outputs).total
    }

    fn output_grads(&self, outputs: &[StepOutput]) -> Vec<HeadGrads> {
        outputs
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let mut dlogits = log_prob_grad(&o.logits, &self.actions[i], -self.advantages[i]);
                let de = entropy_grad(&o.logits, -self.entropy_coeff);
                for (row, erow) in dlogits.iter_mut().zip(&de) {
                    row.iter_mut().zip(erow).for_each(|(a, b)| *a += b);
                }
                HeadGrads { dlogits, dvalue: -2.0 * self.value_coeff * (self.returns[i] - o.value) }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_worked_returns() {
        let (r, a) = compute_returns_advantages(&[1.0], &[0.0], 0.9, 0.0).unwrap();
        assert_eq!((r, a), (vec![1.0], vec![1.0]));
        let (r, a) = compute_returns_advantages(&[1.0, 1.0], &[0.0, 0.0], 0.5, 1.0).unwrap();
        assert_eq!(r, vec![1.75, 1.5]);
        assert_eq!(a, r);
        assert!(compute_returns_advantages(&[], &[], 0.5, 0.0).is_err());
        assert!(compute_returns_advantages(&[1.0], &[], 0.5, 0.0).is_err());
    }

    #[test]
    fn zero_advantage_exact_values_no_entropy_is_zero_loss() {
        let out = StepOutput { logits: [[0.3; 9]; 4], value: 2.0 };
        let l = actor_critic_loss(vec![[1, 2, 3, 4]], vec![2.0], vec![0.0], 0.5, 0.0).unwrap();
        assert_eq!(l.loss(&[out]), 0.0);
        assert!(actor_critic_loss(vec![[0; 4]], vec![1.0, 2.0], vec![0.0], 0.5, 0.0).is_err());
    }

    #[test]
    fn unit_advantage_gives_negative_log_prob_gradient() {
        let mut logits = [[0.0; 9]; 4];
        logits[0][3] = 1.2;
        logits[2][7] = -0.4;
        let out = StepOutput { logits, value: 0.7 };
        let action = [3, 0, 7, 8];
        let l = actor_critic_loss(vec![action], vec![0.7], vec![1.0], 0.0, 0.0).unwrap();
        let g = l.output_grads(&[out])[0];
        assert_eq!(g.dlogits, log_prob_grad(&logits, &action, -1.0));
        assert_eq!(g.dvalue, 0.0);
    }
}
