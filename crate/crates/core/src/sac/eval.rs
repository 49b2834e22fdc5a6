use rand::RngCore;

use crate::autodiff::Tensor;
use crate::envs::{EnvState, Environment};
use crate::error::{Error, Result};
use crate::networks::Policy;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub mean: f64,
    /// Population standard deviation of the episode returns.
    pub std: f64,
    pub returns: Vec<f64>,
    /// Every observation visited, episode by episode.
    pub states: Vec<Vec<f64>>,
}

/// Mean and standard deviation (population form, zero for one value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Undiscounted task return of the deterministic policy over `n_rollouts`
/// episodes from fresh resets. Episodes are stepped in lockstep so the
/// policy runs on one batch per time step.
pub fn evaluate<T: Scalar>(
    policy: &Policy<T>,
    env: &dyn Environment,
    n_rollouts: usize,
    rng: &mut dyn RngCore,
) -> Result<EvalResult> {
    if n_rollouts == 0 {
        return Err(Error::Config("evaluation needs at least one rollout".into()));
    }
    let spec = env.spec();
    let mut states: Vec<EnvState> = (0..n_rollouts).map(|_| env.reset(rng)).collect();
    let mut active: Vec<bool> = vec![true; n_rollouts];
    let mut returns = vec![0.0; n_rollouts];
    let mut visited = Vec::new();

    while active.iter().any(|&a| a) {
        let live: Vec<usize> = (0..n_rollouts).filter(|&i| active[i]).collect();
        let obs: Vec<Vec<T>> = live
            .iter()
            .map(|&i| env.observe(&states[i]).into_iter().map(T::lit).collect())
            .collect();
        let actions = policy.act(&Tensor::from_rows(&obs)?, None)?;
        for (row, &i) in live.iter().enumerate() {
            visited.push(env.observe(&states[i]));
            let a: Vec<f64> = actions.row(row).iter().map(|x| x.as_f64()).collect();
            let out = env.step(&states[i], &a)?;
            returns[i] += out.reward;
            states[i] = out.state;
            if out.done || out.terminal || states[i].t >= spec.horizon {
                active[i] = false;
            }
        }
    }
    let (mean, std) = mean_std(&returns);
    Ok(EvalResult {
        mean,
        std,
        returns,
        states: visited,
    })
}
