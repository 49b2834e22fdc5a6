use crate::autodiff::{Graph, Tensor};
use crate::buffers::Batch;
use crate::error::{Error, Result};
use crate::networks::{polyak_update, Critic, Policy};
use crate::sac::losses::{policy_loss, q_loss, q_target};
use crate::sac::optim::{Optimizer, OptimizerKind};
use crate::scalar::Scalar;

/// Online critic, its Polyak target, and the critic optimizer.
#[derive(Clone, Debug)]
pub struct CriticLearner<T> {
    pub net: Critic<T>,
    pub target: Critic<T>,
    pub opt: Optimizer<T>,
}

impl<T: Scalar> CriticLearner<T> {
    pub fn new(net: Critic<T>, kind: OptimizerKind, lr: f64) -> Self {
        let opt = Optimizer::new(kind, lr, &net.params);
        CriticLearner {
            target: net.clone(),
            net,
            opt,
        }
    }

    /// One gradient step on the soft Bellman loss; returns the loss.
    pub fn update(
        &mut self,
        policy: &Policy<T>,
        batch: &Batch<T>,
        alpha: T,
        gamma: T,
        next_noise: &Tensor<T>,
    ) -> Result<T> {
        let y = q_target(batch, alpha, policy, &self.target, gamma, next_noise)?;
        let mut g = Graph::new();
        let p = g.bind(&self.net.params);
        let loss = q_loss(&mut g, &self.net, &p, batch, &y)?;
        let value = g.item(loss);
        if !value.is_finite() {
            return Err(Error::NonFinite("critic loss".into()));
        }
        let grads = g.gradients(loss, &p)?;
        self.opt.step(&mut self.net.params, &grads)?;
        Ok(value)
    }

    pub fn soft_update(&mut self, tau: T) -> Result<()> {
        polyak_update(&mut self.target.params, &self.net.params, tau)
    }
}

/// Actor and its optimizer.
#[derive(Clone, Debug)]
pub struct PolicyLearner<T> {
    pub net: Policy<T>,
    pub opt: Optimizer<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyUpdate<T> {
    pub loss: T,
    /// Per-sample `log pi(a|s)` of the actions used in the update, drawn
    /// from the pre-update policy.
    pub log_probs: Vec<T>,
}

impl<T: Scalar> PolicyLearner<T> {
    pub fn new(net: Policy<T>, kind: OptimizerKind, lr: f64) -> Self {
        let opt = Optimizer::new(kind, lr, &net.params);
        PolicyLearner { net, opt }
    }

    /// One gradient step on `mean(alpha * log pi - min Q)`, critic fixed.
    pub fn update(
        &mut self,
        critic: &Critic<T>,
        states: &Tensor<T>,
        alpha: T,
        noise: &Tensor<T>,
    ) -> Result<PolicyUpdate<T>> {
        let mut g = Graph::new();
        let p = g.bind(&self.net.params);
        let c = g.bind_constant(&critic.params);
        let (loss, terms) = policy_loss(&mut g, &self.net, &p, critic, &c, alpha, states, noise)?;
        let value = g.item(loss);
        if !value.is_finite() {
            return Err(Error::NonFinite("policy loss".into()));
        }
        let grads = g.gradients(loss, &p)?;
        self.opt.step(&mut self.net.params, &grads)?;
        Ok(PolicyUpdate {
            loss: value,
            log_probs: g.value(terms.log_prob).data().to_vec(),
        })
    }
}
