//! Squashed-Gaussian actor.
//!
//! `u = mu(s) + sigma(s) * noise`, `a = b * tanh(u)`. The log-density of `a`
//! is the Gaussian log-density of `u` minus the log-Jacobian of the squash,
//! `sum_d log(b * (1 - tanh(u_d)^2))`, where the second factor is evaluated
//! as `2 * (ln 2 - u - softplus(-2u))` so it stays finite for any `u`.

use rand::Rng;

use crate::autodiff::{BoundParams, Graph, ParamSet, Tensor, Var};
use crate::error::{Error, Result};
use crate::networks::mlp::MlpLayout;
use crate::scalar::Scalar;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HEAD_INIT_SCALE: f64 = 1e-2;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Architecture of a [`Policy`].
#[derive(Clone, Debug, PartialEq)]
pub struct PolicySpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
    pub action_bound: f64,
}

impl PolicySpec {
    pub fn trunk(&self) -> Result<MlpLayout> {
        let mut dims = vec![self.state_dim];
        dims.extend(&self.hidden);
        MlpLayout::new(dims)
    }

    fn head(&self) -> Result<MlpLayout> {
        let width = self.hidden.last().copied().unwrap_or(self.state_dim);
        MlpLayout::new(vec![width, self.action_dim])
    }
}

/// Actor weights (trunk plus mean and log-std heads) and its layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy<T> {
    spec: PolicySpec,
    pub params: ParamSet<T>,
}

/// Graph handles produced by [`Policy::sample`].
#[derive(Clone, Copy, Debug)]
pub struct PolicySample {
    /// `[n, action_dim]` squashed action.
    pub action: Var,
    /// `[n, 1]` log-density of the squashed action.
    pub log_prob: Var,
    /// `[n, action_dim]` pre-squash Gaussian sample.
    pub pre_squash: Var,
}

impl<T: Scalar> Policy<T> {
    pub fn new<R: Rng + ?Sized>(spec: PolicySpec, rng: &mut R) -> Result<Self> {
        if !(spec.action_bound > 0.0) || spec.action_dim == 0 {
            return Err(Error::Config(format!(
                "policy needs positive action bound and dimension, got {} / {}",
                spec.action_bound, spec.action_dim
            )));
        }
        let mut params = ParamSet::new();
        params.extend_prefixed("trunk.", &spec.trunk()?.init(rng, 1.0));
        params.extend_prefixed("mu.", &spec.head()?.init(rng, HEAD_INIT_SCALE));
        params.extend_prefixed("log_std.", &spec.head()?.init(rng, HEAD_INIT_SCALE));
        Ok(Policy { spec, params })
    }

    /// Wraps existing weights, checking them against `spec`.
    pub fn from_params(spec: PolicySpec, params: ParamSet<T>) -> Result<Self> {
        let policy = Policy { spec, params };
        policy.validate(&policy.params)?;
        Ok(policy)
    }

    pub fn validate(&self, params: &ParamSet<T>) -> Result<()> {
        self.spec.trunk()?.validate(&params.with_prefix("trunk."))?;
        self.spec.head()?.validate(&params.with_prefix("mu."))?;
        self.spec.head()?.validate(&params.with_prefix("log_std."))?;
        let expected = self.params.numel();
        if params.numel() != expected {
            return Err(Error::Structure("unexpected policy entries".into()));
        }
        Ok(())
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    pub fn action_dim(&self) -> usize {
        self.spec.action_dim
    }

    pub fn state_dim(&self) -> usize {
        self.spec.state_dim
    }

    pub fn action_bound(&self) -> T {
        T::lit(self.spec.action_bound)
    }

    /// Mean and clamped log-std heads, each `[n, action_dim]`.
    pub fn heads(&self, g: &mut Graph<T>, p: &BoundParams, states: Var) -> Result<(Var, Var)> {
        let trunk = self.spec.trunk()?;
        let h = trunk.forward(g, &p.with_prefix("trunk."), states, true)?;
        let head = self.spec.head()?;
        let mu = head.forward(g, &p.with_prefix("mu."), h, false)?;
        let raw = head.forward(g, &p.with_prefix("log_std."), h, false)?;
        let log_std = g.clamp(raw, T::lit(LOG_STD_MIN), T::lit(LOG_STD_MAX));
        if !g.value(mu).all_finite() || !g.value(log_std).all_finite() {
            return Err(Error::NonFinite("policy heads".into()));
        }
        Ok((mu, log_std))
    }

    /// Reparameterized sample with externally supplied standard-normal noise.
    pub fn sample(
        &self,
        g: &mut Graph<T>,
        p: &BoundParams,
        states: Var,
        noise: &Tensor<T>,
    ) -> Result<PolicySample> {
        let (mu, log_std) = self.heads(g, p, states)?;
        if noise.shape() != g.shape(mu) {
            return Err(Error::ShapeMismatch {
                op: "policy_sample",
                lhs: g.shape(mu).clone(),
                rhs: noise.shape().clone(),
            });
        }
        self.sample_from_heads(g, mu, log_std, noise)
    }

    /// Sampling and log-density given already computed heads.
    pub fn sample_from_heads(
        &self,
        g: &mut Graph<T>,
        mu: Var,
        log_std: Var,
        noise: &Tensor<T>,
    ) -> Result<PolicySample> {
        let bound = self.action_bound();
        let eps = g.constant(noise.clone());
        let std = g.exp(log_std);
        let spread = g.mul(std, eps)?;
        let u = g.add(mu, spread)?;
        let t = g.tanh(u);
        let action = g.scale(t, bound);

        // Per element: -eps^2/2 - ln(2pi)/2 - ln b - 2 ln 2 - log_std + 2u + 2 softplus(-2u)
        let offset = -HALF_LN_2PI - bound.as_f64().ln() - 2.0 * std::f64::consts::LN_2;
        let base = noise.map(|e| T::lit(offset) - T::lit(0.5) * e * e);
        let base = g.constant(base);
        let neg2u = g.scale(u, T::lit(-2.0));
        let sp = g.softplus(neg2u);
        let u_sp = g.add(u, sp)?;
        let jac = g.scale(u_sp, T::lit(2.0));
        let dens = g.sub(base, log_std)?;
        let per_dim = g.add(dens, jac)?;
        let log_prob = g.sum_cols(per_dim);
        Ok(PolicySample {
            action,
            log_prob,
            pre_squash: u,
        })
    }

    /// `b * tanh(mu(s))`.
    pub fn deterministic(&self, g: &mut Graph<T>, p: &BoundParams, states: Var) -> Result<Var> {
        let (mu, _) = self.heads(g, p, states)?;
        let t = g.tanh(mu);
        Ok(g.scale(t, self.action_bound()))
    }

    /// Actions for a batch of states outside of any training graph.
    /// `noise = None` gives the deterministic action.
    pub fn act(&self, states: &Tensor<T>, noise: Option<&Tensor<T>>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let p = g.bind_constant(&self.params);
        let s = g.constant(states.clone());
        let a = match noise {
            Some(n) => self.sample(&mut g, &p, s, n)?.action,
            None => self.deterministic(&mut g, &p, s)?,
        };
        Ok(g.value(a).clone())
    }

    /// Actions and log-densities for a batch of states.
    pub fn sample_values(&self, states: &Tensor<T>, noise: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let mut g = Graph::new();
        let p = g.bind_constant(&self.params);
        let s = g.constant(states.clone());
        let out = self.sample(&mut g, &p, s, noise)?;
        Ok((g.value(out.action).clone(), g.value(out.log_prob).clone()))
    }

    /// Means and log-stds for a batch of states.
    pub fn head_values(&self, states: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let mut g = Graph::new();
        let p = g.bind_constant(&self.params);
        let s = g.constant(states.clone());
        let (mu, ls) = self.heads(&mut g, &p, s)?;
        Ok((g.value(mu).clone(), g.value(ls).clone()))
    }

    /// Same architecture, different weights.
    pub fn with_params(&self, params: ParamSet<T>) -> Result<Self> {
        self.validate(&params)?;
        Ok(Policy {
            spec: self.spec.clone(),
            params,
        })
    }
}

/// Closed-form log-density of one squashed-Gaussian action coordinate,
/// used by tests and diagnostics that work outside a graph.
pub fn squashed_log_density(a: f64, mu: f64, log_std: f64, bound: f64) -> f64 {
    let y = (a / bound).clamp(-1.0, 1.0);
    let u = y.atanh();
    let z = (u - mu) / log_std.exp();
    -0.5 * z * z - log_std - HALF_LN_2PI - (bound * (1.0 - y * y)).ln()
}
