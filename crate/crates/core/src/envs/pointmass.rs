use rand::{Rng, RngCore};

use crate::envs::{check_state, clip_action, EnvSpec, EnvState, Environment, StepOutcome};
use crate::error::Result;

const DAMPING: f64 = 0.95;
const GAIN: f64 = 0.1;
const DT: f64 = 0.1;
const CONTROL_COST: f64 = 0.01;

/// Damped point mass on the plane, rewarded for staying near the origin.
///
/// State `(x, y, vx, vy)`, action a force in `[-1, 1]^2`, horizon 200.
#[derive(Clone, Copy, Debug, Default)]
pub struct PointMass2D;

impl Environment for PointMass2D {
    fn name(&self) -> &'static str {
        "pointmass"
    }

    fn spec(&self) -> EnvSpec {
        EnvSpec {
            state_dim: 4,
            action_dim: 2,
            action_bound: 1.0,
            horizon: 200,
        }
    }

    fn reset(&self, rng: &mut dyn RngCore) -> EnvState {
        let x = rng.gen_range(-1.0..=1.0);
        let y = rng.gen_range(-1.0..=1.0);
        EnvState {
            internal: vec![x, y, 0.0, 0.0],
            t: 0,
        }
    }

    fn step(&self, state: &EnvState, action: &[f64]) -> Result<StepOutcome> {
        let spec = self.spec();
        let a = clip_action(&spec, action)?;
        check_state(&state.internal)?;
        let s = &state.internal;
        let vx = DAMPING * s[2] + GAIN * a[0];
        let vy = DAMPING * s[3] + GAIN * a[1];
        let x = s[0] + DT * vx;
        let y = s[1] + DT * vy;
        let next = vec![x, y, vx, vy];
        check_state(&next)?;
        let reward = -(x * x + y * y).sqrt() - CONTROL_COST * (a[0] * a[0] + a[1] * a[1]);
        let t = state.t + 1;
        Ok(StepOutcome {
            state: EnvState { internal: next, t },
            reward,
            done: t >= spec.horizon,
            terminal: false,
        })
    }

    fn observe(&self, state: &EnvState) -> Vec<f64> {
        state.internal.clone()
    }
}
