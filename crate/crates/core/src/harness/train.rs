use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{Algo, MetaOrder, MetaQ, MetaStates, RunConfig};
use super::log::{RunLog, RunRow};
use crate::alpha::{AlphaOptimizer, AlphaSchedule, AlphaState};
use crate::autodiff::Tensor;
use crate::buffers::{Batch, InitialStateBuffer, ReplayBuffer, Transition};
use crate::envs::{make_env, EnvSpec, EnvState, Environment};
use crate::error::{Error, Result};
use crate::metagrad::{meta_alpha_grad, MetaProblem};
use crate::metrics::{knn_entropy, trajectory_entropy_rate, StateSample};
use crate::networks::{Critic, CriticSpec, Policy, PolicySpec};
use crate::sac::{evaluate, CriticLearner, OptimizerKind, PolicyLearner, PolicyUpdate};

/// Independent random streams split from one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    Env = 2,
    PolicyNoise = 3,
    Replay = 4,
    Eval = 5,
    Metrics = 6,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

fn normal_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Result<Tensor<f64>> {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Tensor::matrix(rows, cols, data)
}

/// Result of a finished run.
#[derive(Clone, Debug)]
pub struct TrainReport {
    pub log: RunLog,
    /// Gradient update cycles performed.
    pub updates: usize,
    pub initial_log_alpha: f64,
    pub final_log_alpha: f64,
    /// Largest `log alpha` held at any point of the run.
    pub max_log_alpha: f64,
    /// Temperature updates applied by a trainable tuner.
    pub alpha_updates: u64,
    /// Largest absolute gradient applied to `log alpha`.
    pub max_abs_alpha_grad: f64,
    pub initial_policy_fingerprint: u64,
    pub policy: Policy<f64>,
    /// Observations of the final evaluation rollouts.
    pub final_eval_states: Vec<Vec<f64>>,
}

/// Training loop state. [`train`] drives it to completion; tests may step
/// it by hand.
pub struct Trainer {
    cfg: RunConfig,
    env: Box<dyn Environment>,
    spec: EnvSpec,
    policy: PolicyLearner<f64>,
    critic: CriticLearner<f64>,
    classic: Option<CriticLearner<f64>>,
    schedule: AlphaSchedule,
    alpha: AlphaState,
    target_entropy: f64,
    replay: ReplayBuffer<f64>,
    d0: InitialStateBuffer<f64>,
    env_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    eval_rng: ChaCha8Rng,
    metrics_rng: ChaCha8Rng,
    current: Option<EnvState>,
    step: usize,
    updates: usize,
    loss_sums: (f64, f64, usize),
    max_log_alpha: f64,
    initial_log_alpha: f64,
    initial_policy_fingerprint: u64,
    log: RunLog,
    last_eval_states: Vec<Vec<f64>>,
}

impl Trainer {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let env = make_env(&cfg.env)?;
        let spec = env.spec();
        let seed = cfg.seed;

        let mut init_rng = stream_rng(seed, Stream::Init);
        let policy_net = Policy::new(
            PolicySpec {
                state_dim: spec.state_dim,
                action_dim: spec.action_dim,
                hidden: vec![cfg.hidden; 2],
                action_bound: spec.action_bound,
            },
            &mut init_rng,
        )?;
        let critic_spec = CriticSpec {
            state_dim: spec.state_dim,
            action_dim: spec.action_dim,
            hidden: vec![cfg.hidden; 2],
            twin: cfg.twin,
        };
        let critic_net = Critic::new(critic_spec.clone(), &mut init_rng)?;
        let classic = if cfg.algo == Algo::MetaSac && cfg.meta_q == MetaQ::Classic {
            let net = Critic::new(critic_spec, &mut init_rng)?;
            Some(CriticLearner::new(net, OptimizerKind::adam(), cfg.sac.lr_critic))
        } else {
            None
        };
        let initial_policy_fingerprint = policy_net.params.fingerprint();
        let policy = PolicyLearner::new(policy_net, cfg.policy_optimizer_kind()?, cfg.sac.lr_policy);
        let critic = CriticLearner::new(critic_net, OptimizerKind::adam(), cfg.sac.lr_critic);

        let n_updates = cfg.steps - cfg.sac.start_steps;
        let schedule = match cfg.alpha_end {
            Some(end) if n_updates > 0 => AlphaSchedule::decay_between(cfg.alpha, end, n_updates)?,
            _ => AlphaSchedule::Constant(cfg.alpha),
        };
        schedule.validate()?;
        let alpha_opt = if cfg.alpha_adam {
            AlphaOptimizer::adam()
        } else {
            AlphaOptimizer::Sgd
        };
        let alpha = AlphaState::new(cfg.init_alpha, cfg.alpha_lr, alpha_opt)?;

        let mut env_rng = stream_rng(seed, Stream::Env);
        let d0 = InitialStateBuffer::collect(env.as_ref(), cfg.d0_size, &mut env_rng)?;
        let replay = ReplayBuffer::new(cfg.buffer_size, spec.state_dim, spec.action_dim)?;

        let initial_log_alpha = match cfg.algo {
            Algo::SacV1 => schedule.alpha_at(0).ln(),
            _ => alpha.log_alpha(),
        };
        Ok(Trainer {
            target_entropy: cfg.target_entropy_for(spec.action_dim),
            env,
            spec,
            policy,
            critic,
            classic,
            schedule,
            alpha,
            replay,
            d0,
            env_rng,
            noise_rng: stream_rng(seed, Stream::PolicyNoise),
            replay_rng: stream_rng(seed, Stream::Replay),
            eval_rng: stream_rng(seed, Stream::Eval),
            metrics_rng: stream_rng(seed, Stream::Metrics),
            current: None,
            step: 0,
            updates: 0,
            loss_sums: (0.0, 0.0, 0),
            max_log_alpha: initial_log_alpha,
            initial_log_alpha,
            initial_policy_fingerprint,
            log: RunLog::new(),
            last_eval_states: Vec::new(),
            cfg,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn policy(&self) -> &Policy<f64> {
        &self.policy.net
    }

    pub fn critic(&self) -> &Critic<f64> {
        &self.critic.net
    }

    pub fn initial_states(&self) -> &InitialStateBuffer<f64> {
        &self.d0
    }

    pub fn replay(&self) -> &ReplayBuffer<f64> {
        &self.replay
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    /// Temperature in effect for the next update.
    pub fn current_alpha(&self) -> f64 {
        match self.cfg.algo {
            Algo::SacV1 => self.schedule.alpha_at(self.updates),
            _ => self.alpha.alpha(),
        }
    }

    pub fn current_log_alpha(&self) -> f64 {
        match self.cfg.algo {
            Algo::SacV1 => self.schedule.alpha_at(self.updates).ln(),
            _ => self.alpha.log_alpha(),
        }
    }

    /// One environment step, followed by one update cycle once past the
    /// start step and by an evaluation on schedule.
    pub fn step(&mut self) -> Result<()> {
        let state = match self.current.take() {
            Some(s) => s,
            None => self.env.reset(&mut self.env_rng),
        };
        let obs = self.env.observe(&state);
        let action = if self.step < self.cfg.sac.start_steps && !self.cfg.warmup_policy {
            let b = self.spec.action_bound;
            (0..self.spec.action_dim)
                .map(|_| self.noise_rng.gen_range(-b..b))
                .collect::<Vec<f64>>()
        } else {
            let noise = normal_tensor(&mut self.noise_rng, 1, self.spec.action_dim)?;
            let s = Tensor::matrix(1, self.spec.state_dim, obs.clone())?;
            self.policy.net.act(&s, Some(&noise))?.into_data()
        };
        let out = self.env.step(&state, &action)?;
        self.replay.push(Transition {
            state: obs,
            action,
            reward: out.reward,
            next_state: self.env.observe(&out.state),
            terminal: out.terminal,
        })?;
        let finished = out.done || out.terminal || out.state.t >= self.spec.horizon;
        self.current = if finished { None } else { Some(out.state) };
        self.step += 1;

        if self.step > self.cfg.sac.start_steps {
            let step = self.step;
            self.update().map_err(|e| match e {
                Error::NonFinite(_) => Error::Diverged {
                    step,
                    what: "training update",
                },
                other => other,
            })?;
        }
        if self.step % self.cfg.eval_interval == 0 {
            self.evaluate_row()?;
        }
        Ok(())
    }

    fn update(&mut self) -> Result<()> {
        let b = self.cfg.sac.batch_size;
        let batch = self.replay.sample(b, &mut self.replay_rng)?;
        match self.cfg.algo {
            Algo::SacV1 => {
                let alpha = self.schedule.alpha_at(self.updates);
                self.real_updates(&batch, alpha)?;
            }
            Algo::SacV2 => {
                let alpha = self.alpha.alpha();
                let up = self.real_updates(&batch, alpha)?;
                self.alpha.dual_update(&up.log_probs, self.target_entropy)?;
            }
            Algo::MetaSac => match self.cfg.meta_order {
                MetaOrder::AlphaFirst => {
                    self.meta_step(&batch)?;
                    let fresh = self.replay.resample_fresh(&batch, self.cfg.resample, &mut self.replay_rng)?;
                    let alpha = self.alpha.alpha();
                    self.real_updates(&fresh, alpha)?;
                }
                MetaOrder::Alg1 => {
                    let alpha = self.alpha.alpha();
                    self.real_updates(&batch, alpha)?;
                    let fresh = self.replay.resample_fresh(&batch, self.cfg.resample, &mut self.replay_rng)?;
                    self.meta_step(&fresh)?;
                }
            },
        }
        self.updates += 1;
        self.max_log_alpha = self.max_log_alpha.max(self.current_log_alpha());
        Ok(())
    }

    /// Critic step, policy step and target tracking at temperature `alpha`.
    fn real_updates(&mut self, batch: &Batch<f64>, alpha: f64) -> Result<PolicyUpdate<f64>> {
        let (b, ad) = (batch.len(), self.spec.action_dim);
        let gamma = self.cfg.sac.gamma;
        let tau = self.cfg.sac.tau;
        let next_noise = normal_tensor(&mut self.noise_rng, b, ad)?;
        let q_loss = self.critic.update(&self.policy.net, batch, alpha, gamma, &next_noise)?;
        if let Some(classic) = self.classic.as_mut() {
            classic.update(&self.policy.net, batch, 0.0, gamma, &next_noise)?;
        }
        let noise = normal_tensor(&mut self.noise_rng, b, ad)?;
        let up = self.policy.update(&self.critic.net, &batch.states, alpha, &noise)?;
        self.critic.soft_update(tau)?;
        if let Some(classic) = self.classic.as_mut() {
            classic.soft_update(tau)?;
        }
        self.loss_sums.0 += q_loss;
        self.loss_sums.1 += up.loss;
        self.loss_sums.2 += 1;
        Ok(up)
    }

    /// Metagradient temperature update from the current policy, critic and
    /// policy-optimizer accumulators.
    fn meta_step(&mut self, batch: &Batch<f64>) -> Result<()> {
        let noise = normal_tensor(&mut self.noise_rng, batch.len(), self.spec.action_dim)?;
        let arbitrary;
        let meta_states = match self.cfg.meta_states {
            MetaStates::Initial => self.d0.states(),
            MetaStates::Arbitrary => {
                let n = self.cfg.d0_size.min(self.replay.len());
                arbitrary = self.replay.sample(n, &mut self.replay_rng)?.states;
                &arbitrary
            }
        };
        let meta_critic = match &self.classic {
            Some(c) => &c.net,
            None => &self.critic.net,
        };
        let problem = MetaProblem {
            policy: &self.policy.net,
            critic: &self.critic.net,
            meta_critic,
            optimizer: &self.policy.opt,
            states: &batch.states,
            noise: &noise,
            meta_states,
        };
        let mg = meta_alpha_grad(&problem, self.alpha.alpha())?;
        self.alpha.meta_update(mg.grad_alpha)?;
        Ok(())
    }

    fn evaluate_row(&mut self) -> Result<()> {
        let eval = evaluate(
            &self.policy.net,
            self.env.as_ref(),
            self.cfg.eval_rollouts,
            &mut self.eval_rng,
        )?;
        let (traj, state_h) = self.exploration_metrics()?;
        let (q_sum, pi_sum, n) = std::mem::take(&mut self.loss_sums);
        let mean = |s: f64| if n == 0 { f64::NAN } else { s / n as f64 };
        self.log.push(RunRow {
            step: self.step,
            eval_return_mean: eval.mean,
            eval_return_std: eval.std,
            log_alpha: self.current_log_alpha(),
            q_loss: mean(q_sum),
            pi_loss: mean(pi_sum),
            traj_entropy_rate: traj,
            state_entropy: state_h,
        })?;
        self.last_eval_states = eval.states;
        Ok(())
    }

    /// Entropy rate and k-NN state entropy over the most recent replay
    /// states; NaN when there are too few.
    fn exploration_metrics(&mut self) -> Result<(f64, f64)> {
        let rows = self.replay.recent_states(self.cfg.metric_window);
        if rows.len() <= self.cfg.knn_k {
            return Ok((f64::NAN, f64::NAN));
        }
        let traj = trajectory_entropy_rate(
            &self.policy.net,
            &Tensor::from_rows(&rows)?,
            self.cfg.rate_mode,
            &mut self.metrics_rng,
        )?;
        let state_h = knn_entropy(&StateSample::from_rows(&rows)?, self.cfg.knn_k)?;
        Ok((traj, state_h))
    }

    /// Runs the remaining steps and returns the report.
    pub fn run(mut self) -> Result<TrainReport> {
        while self.step < self.cfg.steps {
            self.step()?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> TrainReport {
        let trainable = self.cfg.algo != Algo::SacV1;
        TrainReport {
            updates: self.updates,
            initial_log_alpha: self.initial_log_alpha,
            final_log_alpha: self.current_log_alpha(),
            max_log_alpha: self.max_log_alpha,
            alpha_updates: if trainable { self.alpha.updates() } else { 0 },
            max_abs_alpha_grad: if trainable { self.alpha.max_abs_applied() } else { 0.0 },
            initial_policy_fingerprint: self.initial_policy_fingerprint,
            policy: self.policy.net,
            final_eval_states: self.last_eval_states,
            log: self.log,
        }
    }
}

/// Runs one configuration to completion.
pub fn train(cfg: RunConfig) -> Result<TrainReport> {
    Trainer::new(cfg)?.run()
}
