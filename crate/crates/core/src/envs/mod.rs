//! Desk-scale continuous-control tasks with deterministic dynamics and
//! random initial states.

mod pendulum;
mod pointmass;

use rand::RngCore;

use crate::error::{Error, Result};

pub use pendulum::Pendulum;
pub use pointmass::PointMass2D;

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_bound: f64,
    pub horizon: usize,
}

/// Internal simulator state plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub internal: Vec<f64>,
    pub t: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    pub reward: f64,
    /// Episode over. Tasks here only end at the horizon, which is a
    /// truncation rather than a terminal state.
    pub done: bool,
    /// True termination (no bootstrapping past this transition).
    pub terminal: bool,
}

pub trait Environment: Send + Sync {
    fn name(&self) -> &'static str;

    fn spec(&self) -> EnvSpec;

    /// Draws an initial state.
    fn reset(&self, rng: &mut dyn RngCore) -> EnvState;

    /// Pure transition function; actions are clipped to the action box.
    fn step(&self, state: &EnvState, action: &[f64]) -> Result<StepOutcome>;

    /// Observation seen by the agent.
    fn observe(&self, state: &EnvState) -> Vec<f64>;
}

/// Looks up an environment by its configuration name.
pub fn make_env(name: &str) -> Result<Box<dyn Environment>> {
    match name {
        "pointmass" => Ok(Box::new(PointMass2D)),
        "pendulum" => Ok(Box::new(Pendulum)),
        other => Err(Error::Config(format!(
            "unknown environment `{other}` (expected `pointmass` or `pendulum`)"
        ))),
    }
}

pub(crate) fn clip_action(spec: &EnvSpec, action: &[f64]) -> Result<Vec<f64>> {
    if action.len() != spec.action_dim {
        return Err(Error::Dim {
            what: "action",
            expected: spec.action_dim,
            got: action.len(),
        });
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite(format!("action {action:?}")));
    }
    Ok(action
        .iter()
        .map(|a| a.clamp(-spec.action_bound, spec.action_bound))
        .collect())
}

pub(crate) fn check_state(state: &[f64]) -> Result<()> {
    if state.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("environment state {state:?}")))
    }
}
