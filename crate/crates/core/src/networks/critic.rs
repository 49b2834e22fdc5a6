use rand::Rng;

use crate::autodiff::{BoundParams, Graph, ParamSet, Tensor, Var};
use crate::error::{Error, Result};
use crate::networks::mlp::MlpLayout;
use crate::scalar::Scalar;

/// Architecture of a [`Critic`].
#[derive(Clone, Debug, PartialEq)]
pub struct CriticSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
    /// Two independent Q heads combined by elementwise minimum; a single
    /// head otherwise.
    pub twin: bool,
}

impl CriticSpec {
    pub fn layout(&self) -> Result<MlpLayout> {
        let mut dims = vec![self.state_dim + self.action_dim];
        dims.extend(&self.hidden);
        dims.push(1);
        MlpLayout::new(dims)
    }

    fn heads(&self) -> &'static [&'static str] {
        if self.twin {
            &["q1.", "q2."]
        } else {
            &["q1."]
        }
    }
}

/// One or two Q networks mapping `(state, action)` to a scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct Critic<T> {
    spec: CriticSpec,
    pub params: ParamSet<T>,
}

impl<T: Scalar> Critic<T> {
    pub fn new<R: Rng + ?Sized>(spec: CriticSpec, rng: &mut R) -> Result<Self> {
        let layout = spec.layout()?;
        let mut params = ParamSet::new();
        for head in spec.heads() {
            params.extend_prefixed(head, &layout.init(rng, 1.0));
        }
        Ok(Critic { spec, params })
    }

    pub fn spec(&self) -> &CriticSpec {
        &self.spec
    }

    pub fn validate(&self, params: &ParamSet<T>) -> Result<()> {
        let layout = self.spec.layout()?;
        for head in self.spec.heads() {
            layout.validate(&params.with_prefix(head))?;
        }
        if params.numel() != self.params.numel() {
            return Err(Error::Structure("unexpected critic entries".into()));
        }
        Ok(())
    }

    /// Per-head Q values, each `[n, 1]`.
    pub fn q_values(&self, g: &mut Graph<T>, p: &BoundParams, states: Var, actions: Var) -> Result<Vec<Var>> {
        let layout = self.spec.layout()?;
        let input = g.concat(&[states, actions])?;
        self.spec
            .heads()
            .iter()
            .map(|head| layout.forward(g, &p.with_prefix(head), input, false))
            .collect()
    }

    /// Elementwise minimum over heads, `[n, 1]`.
    pub fn min_q(&self, g: &mut Graph<T>, p: &BoundParams, states: Var, actions: Var) -> Result<Var> {
        let qs = self.q_values(g, p, states, actions)?;
        let mut m = qs[0];
        for &q in &qs[1..] {
            m = g.minimum(m, q)?;
        }
        Ok(m)
    }

    /// `min_q` evaluated outside of a training graph.
    pub fn min_q_values(&self, states: &Tensor<T>, actions: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let p = g.bind_constant(&self.params);
        let s = g.constant(states.clone());
        let a = g.constant(actions.clone());
        let q = self.min_q(&mut g, &p, s, a)?;
        Ok(g.value(q).clone())
    }
}

/// `target <- tau * online + (1 - tau) * target`.
pub fn polyak_update<T: Scalar>(target: &mut ParamSet<T>, online: &ParamSet<T>, tau: T) -> Result<()> {
    if !(tau >= T::zero() && tau <= T::one()) {
        return Err(Error::Config(format!("polyak coefficient {tau} outside [0, 1]")));
    }
    *target = target.zip_map(online, |t, o| tau * o + (T::one() - tau) * t)?;
    Ok(())
}
