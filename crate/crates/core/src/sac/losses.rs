//! Soft Bellman targets, critic loss and policy loss.

use crate::autodiff::{BoundParams, Graph, Tensor, Var};
use crate::buffers::Batch;
use crate::error::{Error, Result};
use crate::networks::{Critic, Policy};
use crate::scalar::Scalar;

/// `y = r + gamma * (1 - terminal) * (min Q_target(s', a') - alpha * log pi(a'|s'))`
/// with `a' ~ pi(.|s')` drawn from `next_noise`. Returned as plain values, so
/// nothing downstream can differentiate through it.
pub fn q_target<T: Scalar>(
    batch: &Batch<T>,
    alpha: T,
    policy: &Policy<T>,
    target: &Critic<T>,
    gamma: T,
    next_noise: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (next_actions, next_log_prob) = policy.sample_values(&batch.next_states, next_noise)?;
    let next_q = target.min_q_values(&batch.next_states, &next_actions)?;
    let data = (0..batch.len())
        .map(|i| {
            let soft = next_q.data()[i] - alpha * next_log_prob.data()[i];
            batch.rewards.data()[i] + gamma * batch.not_terminal.data()[i] * soft
        })
        .collect();
    Tensor::matrix(batch.len(), 1, data)
}

/// Mean over the batch and over critic heads of `(Q(s, a) - y)^2 / 2`.
pub fn q_loss<T: Scalar>(
    g: &mut Graph<T>,
    critic: &Critic<T>,
    params: &BoundParams,
    batch: &Batch<T>,
    targets: &Tensor<T>,
) -> Result<Var> {
    let s = g.constant(batch.states.clone());
    let a = g.constant(batch.actions.clone());
    let y = g.constant(targets.clone());
    let qs = critic.q_values(g, params, s, a)?;
    let mut total: Option<Var> = None;
    for q in &qs {
        let diff = g.sub(*q, y)?;
        let sq = g.square(diff);
        let m = g.mean(sq);
        total = Some(match total {
            Some(t) => g.add(t, m)?,
            None => m,
        });
    }
    let total = total.ok_or(Error::Empty("critic heads"))?;
    Ok(g.scale(total, T::lit(0.5 / qs.len() as f64)))
}

/// Graph pieces shared by the policy loss and its decomposition.
#[derive(Clone, Copy, Debug)]
pub struct PolicyTerms {
    /// Scalar: mean over the batch of `log pi(a|s)`.
    pub mean_log_prob: Var,
    /// Scalar: mean over the batch of `-min Q(s, a)`.
    pub mean_neg_q: Var,
    /// `[n, 1]` per-sample log-densities.
    pub log_prob: Var,
}

/// Builds both terms of the policy objective for reparameterized actions
/// `a = policy_sample(phi, s, noise)`. The critic must be bound as constants
/// for the result to be a gradient with respect to the policy only.
pub fn policy_terms<T: Scalar>(
    g: &mut Graph<T>,
    policy: &Policy<T>,
    policy_params: &BoundParams,
    critic: &Critic<T>,
    critic_params: &BoundParams,
    states: &Tensor<T>,
    noise: &Tensor<T>,
) -> Result<PolicyTerms> {
    let s = g.constant(states.clone());
    let sample = policy.sample(g, policy_params, s, noise)?;
    let q = critic.min_q(g, critic_params, s, sample.action)?;
    let mean_log_prob = g.mean(sample.log_prob);
    let mean_q = g.mean(q);
    let mean_neg_q = g.neg(mean_q);
    Ok(PolicyTerms {
        mean_log_prob,
        mean_neg_q,
        log_prob: sample.log_prob,
    })
}

/// `mean(alpha * log pi(a|s) - min Q(s, a))` over the batch.
pub fn policy_loss<T: Scalar>(
    g: &mut Graph<T>,
    policy: &Policy<T>,
    policy_params: &BoundParams,
    critic: &Critic<T>,
    critic_params: &BoundParams,
    alpha: T,
    states: &Tensor<T>,
    noise: &Tensor<T>,
) -> Result<(Var, PolicyTerms)> {
    let s = g.constant(states.clone());
    let sample = policy.sample(g, policy_params, s, noise)?;
    let q = critic.min_q(g, critic_params, s, sample.action)?;
    let a = g.scalar(alpha);
    let weighted = g.mul(sample.log_prob, a)?;
    let per_sample = g.sub(weighted, q)?;
    let loss = g.mean(per_sample);
    let mean_log_prob = g.mean(sample.log_prob);
    let mean_q = g.mean(q);
    let mean_neg_q = g.neg(mean_q);
    Ok((
        loss,
        PolicyTerms {
            mean_log_prob,
            mean_neg_q,
            log_prob: sample.log_prob,
        },
    ))
}
