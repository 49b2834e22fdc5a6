use crate::autodiff::ParamSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Update rule and its constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    /// `v <- decay * v + (1 - decay) * g^2`, `p <- p - lr * g / (sqrt(v) + eps)`.
    RmsProp { decay: f64, eps: f64 },
    /// Bias-corrected Adam.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub const RMSPROP_DECAY: f64 = 0.99;
    pub const RMSPROP_EPS: f64 = 1e-12;

    pub fn rmsprop() -> Self {
        OptimizerKind::RmsProp {
            decay: Self::RMSPROP_DECAY,
            eps: Self::RMSPROP_EPS,
        }
    }

    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter accumulators.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T> {
    /// Running mean of squared gradients (RMSProp, Adam).
    pub second: ParamSet<T>,
    /// Running mean of gradients (Adam only).
    pub first: ParamSet<T>,
    pub steps: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    lr: T,
    state: OptimizerState<T>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64, params: &ParamSet<T>) -> Self {
        Optimizer {
            kind,
            lr: T::lit(lr),
            state: OptimizerState {
                second: params.zeros_like(),
                first: params.zeros_like(),
                steps: 0,
            },
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn lr(&self) -> T {
        self.lr
    }

    pub fn state(&self) -> &OptimizerState<T> {
        &self.state
    }

    /// Replaces the accumulators, e.g. to resume from a snapshot.
    pub fn set_state(&mut self, state: OptimizerState<T>) -> Result<()> {
        self.state.second.check_same_structure(&state.second)?;
        self.state = state;
        Ok(())
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &ParamSet<T>) -> Result<()> {
        params.check_same_structure(grads)?;
        self.state.steps += 1;
        let lr = self.lr;
        match self.kind {
            OptimizerKind::Sgd => params.add_scaled(-lr, grads)?,
            OptimizerKind::RmsProp { decay, eps } => {
                let (rho, eps) = (T::lit(decay), T::lit(eps));
                let v = &mut self.state.second;
                v.check_same_structure(grads)?;
                for (((_, p), (_, vv)), (_, g)) in params.iter_mut().zip(v.iter_mut()).zip(grads.iter()) {
                    for ((pi, vi), &gi) in p.data_mut().iter_mut().zip(vv.data_mut()).zip(g.data()) {
                        *vi = rho * *vi + (T::one() - rho) * gi * gi;
                        *pi -= lr * gi / (vi.sqrt() + eps);
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let (b1, b2, eps) = (T::lit(beta1), T::lit(beta2), T::lit(eps));
                let t = self.state.steps as i32;
                let c1 = T::one() - b1.powi(t);
                let c2 = T::one() - b2.powi(t);
                let OptimizerState { first, second, .. } = &mut self.state;
                first.check_same_structure(grads)?;
                for ((((_, p), (_, m)), (_, v)), (_, g)) in params
                    .iter_mut()
                    .zip(first.iter_mut())
                    .zip(second.iter_mut())
                    .zip(grads.iter())
                {
                    let data = p.data_mut().iter_mut().zip(m.data_mut()).zip(v.data_mut());
                    for (((pi, mi), vi), &gi) in data.zip(g.data()) {
                        *mi = b1 * *mi + (T::one() - b1) * gi;
                        *vi = b2 * *vi + (T::one() - b2) * gi * gi;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *pi -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        if !params.all_finite() {
            return Err(Error::NonFinite("parameters after optimizer step".into()));
        }
        Ok(())
    }
}
