use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::networks::Policy;
use crate::scalar::Scalar;

/// Action draws per state in [`RateMode::MonteCarlo`].
pub const MC_SAMPLES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateMode {
    /// Closed-form entropy of the Gaussian before squashing,
    /// `sum_d ln sigma_d + d/2 ln(2 pi e)`.
    Gaussian,
    /// Mean of `-log pi(a|s)` over this many sampled squashed actions.
    MonteCarlo(usize),
}

impl RateMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(RateMode::Gaussian),
            "mc" => Ok(RateMode::MonteCarlo(MC_SAMPLES)),
            other => Err(Error::Parse(format!("unknown entropy-rate mode '{other}'"))),
        }
    }
}

/// Average per-state action entropy of `policy` over `states` (`[N, d]`).
/// The initial-state entropy term is left out.
pub fn trajectory_entropy_rate<T: Scalar>(
    policy: &Policy<T>,
    states: &Tensor<T>,
    mode: RateMode,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if states.numel() == 0 {
        return Err(Error::Empty("entropy-rate states"));
    }
    let n = states.rows();
    match mode {
        RateMode::Gaussian => {
            let (_, log_std) = policy.head_values(states)?;
            let d = policy.action_dim() as f64;
            let const_term = 0.5 * d * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
            let total: f64 = log_std.data().iter().map(|x| x.as_f64()).sum();
            Ok(const_term + total / n as f64)
        }
        RateMode::MonteCarlo(k) => {
            if k == 0 {
                return Err(Error::Config("Monte Carlo entropy needs at least one sample".into()));
            }
            let sd = states.cols();
            let ad = policy.action_dim();
            let mut tiled = Vec::with_capacity(n * k * sd);
            for i in 0..n {
                for _ in 0..k {
                    tiled.extend_from_slice(states.row(i));
                }
            }
            let noise: Vec<T> = (0..n * k * ad)
                .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
                .collect();
            let (_, log_prob) = policy.sample_values(
                &Tensor::matrix(n * k, sd, tiled)?,
                &Tensor::matrix(n * k, ad, noise)?,
            )?;
            let total: f64 = log_prob.data().iter().map(|x| x.as_f64()).sum();
            Ok(-total / (n * k) as f64)
        }
    }
}
