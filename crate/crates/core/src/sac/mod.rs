//! Soft actor-critic: losses, learners, optimizers and evaluation.

mod eval;
mod learner;
mod losses;
mod optim;

pub use eval::{evaluate, mean_std, EvalResult};
pub use learner::{CriticLearner, PolicyLearner, PolicyUpdate};
pub use losses::{policy_loss, policy_terms, q_loss, q_target, PolicyTerms};
pub use optim::{Optimizer, OptimizerKind, OptimizerState};

use crate::error::{Error, Result};

/// Core SAC hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SacHyper {
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub lr_critic: f64,
    pub lr_policy: f64,
    pub start_steps: usize,
}

impl Default for SacHyper {
    fn default() -> Self {
        SacHyper {
            gamma: 0.99,
            tau: 0.05,
            batch_size: 256,
            lr_critic: 3e-4,
            lr_policy: 3e-4,
            start_steps: 1000,
        }
    }
}

impl SacHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma {} must lie in (0, 1)", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau {} must lie in (0, 1]", self.tau)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.lr_critic > 0.0 && self.lr_policy > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        Ok(())
    }
}
