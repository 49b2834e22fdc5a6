//! Metagradient of the temperature.
//!
//! The policy loss `mean(alpha * log pi - min Q)` is affine in `alpha`, so its
//! gradient splits as `alpha * g_H + g_Q` where neither part depends on
//! `alpha`. A hypothetical RMSProp step
//!
//! ```text
//! g   = alpha * g_H + g_Q
//! v'  = rho * v + (1 - rho) * g^2
//! phi+ = phi - lr * g / (sqrt(v') + eps)
//! ```
//!
//! then has the closed-form sensitivity
//!
//! ```text
//! dphi+/dalpha = -lr * [ g_H / (sqrt(v') + eps)
//!                        - g * (1 - rho) * g * g_H / (sqrt(v') * (sqrt(v') + eps)^2) ]
//! ```
//!
//! and the temperature gradient of the meta loss
//! `L_meta = mean_{s0} -min Q(s0, b * tanh(mu_{phi+}(s0)))` is the inner
//! product of `dL_meta/dphi+` (one reverse sweep) with `dphi+/dalpha`. No
//! second-order differentiation is involved. The critic enters the meta loss
//! as constants only.

use crate::autodiff::{Graph, ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::networks::{Critic, Policy};
use crate::sac::{policy_loss, policy_terms, Optimizer, OptimizerKind};
use crate::scalar::Scalar;

/// Policy gradient split into its temperature-weighted and critic parts.
#[derive(Clone, Debug, PartialEq)]
pub struct GradDecomposition<T> {
    /// Gradient of `mean(log pi(a|s))`.
    pub g_entropy: ParamSet<T>,
    /// Gradient of `mean(-min Q(s, a))`.
    pub g_critic: ParamSet<T>,
    /// Batch mean of `log pi(a|s)`.
    pub mean_log_prob: T,
}

impl<T: Scalar> GradDecomposition<T> {
    /// `alpha * g_H + g_Q`, the policy-loss gradient at `alpha`.
    pub fn combined(&self, alpha: T) -> Result<ParamSet<T>> {
        self.g_entropy.zip_map(&self.g_critic, |h, q| alpha * h + q)
    }
}

/// Both parts of the policy gradient from one forward pass and two reverse
/// sweeps. `states`/`noise` must be the ones that define the hypothetical
/// step.
pub fn decompose_policy_grad<T: Scalar>(
    policy: &Policy<T>,
    critic: &Critic<T>,
    states: &Tensor<T>,
    noise: &Tensor<T>,
) -> Result<GradDecomposition<T>> {
    let mut g = Graph::new();
    let p = g.bind(&policy.params);
    let c = g.bind_constant(&critic.params);
    let terms = policy_terms(&mut g, policy, &p, critic, &c, states, noise)?;
    Ok(GradDecomposition {
        g_entropy: g.gradients(terms.mean_log_prob, &p)?,
        g_critic: g.gradients(terms.mean_neg_q, &p)?,
        mean_log_prob: g.item(terms.mean_log_prob),
    })
}

/// Policy parameters after a step that is never committed, with their
/// derivative with respect to the temperature.
#[derive(Clone, Debug, PartialEq)]
pub struct HypotheticalStep<T> {
    pub params: ParamSet<T>,
    pub sensitivity: ParamSet<T>,
}

/// Hypothetical step using the update rule and accumulator snapshot of
/// `optimizer`, which is only read. SGD and RMSProp are supported.
pub fn hypothetical_step<T: Scalar>(
    params: &ParamSet<T>,
    dec: &GradDecomposition<T>,
    alpha: T,
    optimizer: &Optimizer<T>,
) -> Result<HypotheticalStep<T>> {
    let lr = optimizer.lr();
    let g = dec.combined(alpha)?;
    match optimizer.kind() {
        OptimizerKind::Sgd => {
            let mut next = params.clone();
            next.add_scaled(-lr, &g)?;
            Ok(HypotheticalStep {
                params: next,
                sensitivity: dec.g_entropy.map(|h| -lr * h),
            })
        }
        OptimizerKind::RmsProp { decay, eps } => {
            rmsprop_step_with_sensitivity(params, dec, alpha, &optimizer.state().second, lr, T::lit(decay), T::lit(eps))
        }
        OptimizerKind::Adam { .. } => Err(Error::Config(
            "metagradient requires an SGD or RMSProp policy optimizer".into(),
        )),
    }
}

/// RMSProp step from accumulator `v` with its exact `alpha`-derivative.
pub fn rmsprop_step_with_sensitivity<T: Scalar>(
    params: &ParamSet<T>,
    dec: &GradDecomposition<T>,
    alpha: T,
    v: &ParamSet<T>,
    lr: T,
    rho: T,
    eps: T,
) -> Result<HypotheticalStep<T>> {
    params.check_same_structure(v)?;
    params.check_same_structure(&dec.g_entropy)?;
    params.check_same_structure(&dec.g_critic)?;
    if let Some(bad) = v.flatten().into_iter().find(|x| !(*x >= T::zero())) {
        return Err(Error::Domain {
            op: "rmsprop accumulator",
            value: bad.as_f64(),
        });
    }
    let one = T::one();
    let mut next = params.clone();
    let mut sens = params.zeros_like();
    let entries = next
        .iter_mut()
        .zip(sens.iter_mut())
        .zip(v.iter())
        .zip(dec.g_entropy.iter())
        .zip(dec.g_critic.iter());
    for ((((( _, p), (_, s)), (_, vv)), (_, gh)), (_, gq)) in entries {
        let lanes = p
            .data_mut()
            .iter_mut()
            .zip(s.data_mut())
            .zip(vv.data())
            .zip(gh.data())
            .zip(gq.data());
        for ((((pi, si), &vi), &hi), &qi) in lanes {
            let g = alpha * hi + qi;
            let v_next = rho * vi + (one - rho) * g * g;
            let root = v_next.sqrt();
            let denom = root + eps;
            *pi -= lr * g / denom;
            let curvature = if root > T::zero() {
                g * (one - rho) * g * hi / (root * denom * denom)
            } else {
                T::zero()
            };
            *si = -lr * (hi / denom - curvature);
        }
    }
    Ok(HypotheticalStep {
        params: next,
        sensitivity: sens,
    })
}

/// `mean_{s0} -min Q(s0, deterministic action of the policy with weights
/// params)`, value only.
pub fn meta_loss<T: Scalar>(
    policy: &Policy<T>,
    params: &ParamSet<T>,
    critic: &Critic<T>,
    states: &Tensor<T>,
) -> Result<T> {
    Ok(meta_loss_and_grad(policy, params, critic, states, false)?.0)
}

/// Meta loss and, when `with_grad` is set, its gradient with respect to the
/// policy weights. The critic is bound as constants.
pub fn meta_loss_and_grad<T: Scalar>(
    policy: &Policy<T>,
    params: &ParamSet<T>,
    critic: &Critic<T>,
    states: &Tensor<T>,
    with_grad: bool,
) -> Result<(T, Option<ParamSet<T>>)> {
    if states.numel() == 0 {
        return Err(Error::Empty("meta-loss states"));
    }
    policy.validate(params)?;
    let mut g = Graph::new();
    let p = if with_grad {
        g.bind(params)
    } else {
        g.bind_constant(params)
    };
    let c = g.bind_constant(&critic.params);
    let s = g.constant(states.clone());
    let a = policy.deterministic(&mut g, &p, s)?;
    let q = critic.min_q(&mut g, &c, s, a)?;
    let mean_q = g.mean(q);
    let loss = g.neg(mean_q);
    let grad = if with_grad {
        Some(g.gradients(loss, &p)?)
    } else {
        None
    };
    Ok((g.item(loss), grad))
}

/// Everything one temperature update reads. Nothing here is mutated.
#[derive(Clone, Copy, Debug)]
pub struct MetaProblem<'a, T> {
    pub policy: &'a Policy<T>,
    /// Critic inside the policy loss.
    pub critic: &'a Critic<T>,
    /// Critic inside the meta loss (the soft critic, or an auxiliary
    /// entropy-free critic for the classic-Q variant).
    pub meta_critic: &'a Critic<T>,
    /// Real policy optimizer; its rule and accumulators define the step.
    pub optimizer: &'a Optimizer<T>,
    /// Batch states for the policy loss.
    pub states: &'a Tensor<T>,
    /// Standard-normal draws shared by every evaluation at this update.
    pub noise: &'a Tensor<T>,
    /// States the meta loss averages over.
    pub meta_states: &'a Tensor<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaGradient<T> {
    /// `dL_meta / d alpha`.
    pub grad_alpha: T,
    /// `L_meta` at the current temperature.
    pub meta_loss: T,
    pub mean_log_prob: T,
}

/// Exact `dL_meta/d alpha` by the analytic sensitivity path.
pub fn meta_alpha_grad<T: Scalar>(problem: &MetaProblem<'_, T>, alpha: T) -> Result<MetaGradient<T>> {
    let dec = decompose_policy_grad(problem.policy, problem.critic, problem.states, problem.noise)?;
    let step = hypothetical_step(&problem.policy.params, &dec, alpha, problem.optimizer)?;
    let (loss, u) = meta_loss_and_grad(
        problem.policy,
        &step.params,
        problem.meta_critic,
        problem.meta_states,
        true,
    )?;
    let u = u.expect("gradient requested");
    Ok(MetaGradient {
        grad_alpha: u.dot(&step.sensitivity)?,
        meta_loss: loss,
        mean_log_prob: dec.mean_log_prob,
    })
}

/// `L_meta` after a hypothetical step at `alpha`, computed by a direct
/// policy-loss backward pass and a real optimizer step on a copy of the
/// optimizer. Shares no code with the sensitivity formula.
pub fn meta_loss_at<T: Scalar>(problem: &MetaProblem<'_, T>, alpha: T) -> Result<T> {
    let policy = problem.policy;
    let mut g = Graph::new();
    let p = g.bind(&policy.params);
    let c = g.bind_constant(&problem.critic.params);
    let (loss, _) = policy_loss(&mut g, policy, &p, problem.critic, &c, alpha, problem.states, problem.noise)?;
    let grads = g.gradients(loss, &p)?;
    let mut opt = problem.optimizer.clone();
    let mut params = policy.params.clone();
    opt.step(&mut params, &grads)?;
    meta_loss(policy, &params, problem.meta_critic, problem.meta_states)
}

/// Central difference `(L(alpha + h) - L(alpha - h)) / 2h` with common random
/// numbers and the same optimizer snapshot at both points.
pub fn meta_alpha_fd_oracle<T: Scalar>(problem: &MetaProblem<'_, T>, alpha: T, h: T) -> Result<T> {
    if !(h > T::zero()) {
        return Err(Error::Config("finite-difference step must be positive".into()));
    }
    let plus = meta_loss_at(problem, alpha + h)?;
    let minus = meta_loss_at(problem, alpha - h)?;
    Ok((plus - minus) / (h + h))
}

/// A small random problem for checking [`meta_alpha_grad`] against
/// [`meta_alpha_fd_oracle`].
#[derive(Clone, Debug)]
pub struct GradcheckInstance {
    pub policy: Policy<f64>,
    pub critic: Critic<f64>,
    pub optimizer: Optimizer<f64>,
    pub states: Tensor<f64>,
    pub noise: Tensor<f64>,
    pub meta_states: Tensor<f64>,
    pub alpha: f64,
    pub hidden: usize,
    pub batch: usize,
}

pub const GRADCHECK_WIDTHS: [usize; 3] = [4, 8, 16];
pub const GRADCHECK_BATCHES: [usize; 2] = [4, 16];
pub const GRADCHECK_META_STATES: usize = 16;

impl GradcheckInstance {
    /// Three-dimensional states, two-dimensional actions, hidden width and
    /// batch size from the given sets, `alpha` log-uniform in `[e^-4, 1]`,
    /// and an RMSProp accumulator with random positive entries.
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R) -> Result<Self> {
        use crate::networks::{CriticSpec, PolicySpec};
        use rand_distr::StandardNormal;

        let (sd, ad) = (3, 2);
        let hidden = GRADCHECK_WIDTHS[rng.gen_range(0..GRADCHECK_WIDTHS.len())];
        let batch = GRADCHECK_BATCHES[rng.gen_range(0..GRADCHECK_BATCHES.len())];
        let bound = rng.gen_range(0.5..2.0);
        let policy = Policy::new(
            PolicySpec {
                state_dim: sd,
                action_dim: ad,
                hidden: vec![hidden; 2],
                action_bound: bound,
            },
            rng,
        )?;
        let critic = Critic::new(
            CriticSpec {
                state_dim: sd,
                action_dim: ad,
                hidden: vec![hidden; 2],
                twin: true,
            },
            rng,
        )?;
        let mut optimizer = Optimizer::new(OptimizerKind::rmsprop(), 3e-3, &policy.params);
        let mut state = optimizer.state().clone();
        state.second = policy.params.map(|_| 0.0);
        for (_, t) in state.second.iter_mut() {
            for v in t.data_mut() {
                *v = rng.gen_range(-8.0f64..0.0).exp();
            }
        }
        state.steps = 10;
        optimizer.set_state(state)?;
        let mut normal = |rows: usize, cols: usize| {
            let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
            Tensor::matrix(rows, cols, data)
        };
        let states = normal(batch, sd)?;
        let noise = normal(batch, ad)?;
        let meta_states = normal(GRADCHECK_META_STATES, sd)?;
        let alpha = rng.gen_range(-4.0f64..0.0).exp();
        Ok(GradcheckInstance {
            policy,
            critic,
            optimizer,
            states,
            noise,
            meta_states,
            alpha,
            hidden,
            batch,
        })
    }

    pub fn problem(&self) -> MetaProblem<'_, f64> {
        MetaProblem {
            policy: &self.policy,
            critic: &self.critic,
            meta_critic: &self.critic,
            optimizer: &self.optimizer,
            states: &self.states,
            noise: &self.noise,
            meta_states: &self.meta_states,
        }
    }
}

/// Outcome of one analytic-versus-finite-difference comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct GradcheckResult {
    pub hidden: usize,
    pub batch: usize,
    pub alpha: f64,
    pub analytic: f64,
    pub finite_difference: f64,
    /// `|analytic - fd| / max(|fd|, 1e-8)`.
    pub rel_err: f64,
}

pub fn relative_error(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs().max(1e-8)
}

/// Compares the analytic temperature gradient with the central difference
/// on `count` random instances drawn from `seed`.
pub fn gradcheck(count: usize, seed: u64, h: f64) -> Result<Vec<GradcheckResult>> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let inst = GradcheckInstance::random(&mut rng)?;
            let problem = inst.problem();
            let analytic = meta_alpha_grad(&problem, inst.alpha)?.grad_alpha;
            let fd = meta_alpha_fd_oracle(&problem, inst.alpha, h)?;
            Ok(GradcheckResult {
                hidden: inst.hidden,
                batch: inst.batch,
                alpha: inst.alpha,
                analytic,
                finite_difference: fd,
                rel_err: relative_error(analytic, fd),
            })
        })
        .collect()
}
