use std::f64::consts::PI;

use rand::{Rng, RngCore};

use crate::envs::{check_state, clip_action, EnvSpec, EnvState, Environment, StepOutcome};
use crate::error::Result;

const GRAVITY: f64 = 10.0;
const TORQUE_GAIN: f64 = 3.0;
const MAX_SPEED: f64 = 8.0;
const DT: f64 = 0.05;

/// Torque-limited pendulum; internal state `(theta, theta_dot)`, observed as
/// `(cos theta, sin theta, theta_dot)`. Reward penalizes angle, speed and
/// torque, horizon 200.
///
/// The maximum torque (3 * 2) is below gravity's peak moment (10), so
/// bringing the pendulum to rest at `theta = 0` from large angles takes
/// several swings.
#[derive(Clone, Copy, Debug, Default)]
pub struct Pendulum;

/// Angle mapped into `[-pi, pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

impl Environment for Pendulum {
    fn name(&self) -> &'static str {
        "pendulum"
    }

    fn spec(&self) -> EnvSpec {
        EnvSpec {
            state_dim: 3,
            action_dim: 1,
            action_bound: 2.0,
            horizon: 200,
        }
    }

    fn reset(&self, rng: &mut dyn RngCore) -> EnvState {
        let theta = rng.gen_range(-PI..=PI);
        let omega = rng.gen_range(-1.0..=1.0);
        EnvState {
            internal: vec![theta, omega],
            t: 0,
        }
    }

    fn step(&self, state: &EnvState, action: &[f64]) -> Result<StepOutcome> {
        let spec = self.spec();
        let a = clip_action(&spec, action)?[0];
        check_state(&state.internal)?;
        let (theta, omega) = (state.internal[0], state.internal[1]);

        let th = wrap_angle(theta);
        let reward = -(th * th + 0.1 * omega * omega + 0.001 * a * a);

        let accel = -GRAVITY * theta.sin() + TORQUE_GAIN * a;
        let omega_next = (omega + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
        let theta_next = wrap_angle(theta + omega_next * DT);
        let next = vec![theta_next, omega_next];
        check_state(&next)?;
        let t = state.t + 1;
        Ok(StepOutcome {
            state: EnvState { internal: next, t },
            reward,
            done: t >= spec.horizon,
            terminal: false,
        })
    }

    fn observe(&self, state: &EnvState) -> Vec<f64> {
        let (theta, omega) = (state.internal[0], state.internal[1]);
        vec![theta.cos(), theta.sin(), omega]
    }
}
