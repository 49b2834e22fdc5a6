use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::alpha::DEFAULT_ALPHA_LR;
use crate::error::{Error, Result};
use crate::metrics::{RateMode, DEFAULT_K};
use crate::sac::{OptimizerKind, SacHyper};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algo {
    /// Fixed temperature, optionally decaying.
    SacV1,
    /// Dual descent against a target entropy.
    SacV2,
    /// Metagradient temperature.
    MetaSac,
}

impl Algo {
    pub fn name(&self) -> &'static str {
        match self {
            Algo::SacV1 => "sac-v1",
            Algo::SacV2 => "sac-v2",
            Algo::MetaSac => "meta-sac",
        }
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sac-v1" | "fixed" => Ok(Algo::SacV1),
            "sac-v2" | "dual" => Ok(Algo::SacV2),
            "meta-sac" | "meta" => Ok(Algo::MetaSac),
            other => Err(Error::Parse(format!(
                "unknown algorithm `{other}` (expected sac-v1, sac-v2 or meta-sac)"
            ))),
        }
    }
}

/// Which states the meta loss averages over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetaStates {
    Initial,
    Arbitrary,
}

/// Which critic the meta loss reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetaQ {
    Soft,
    /// Auxiliary critic whose targets carry no entropy bonus.
    Classic,
}

/// Order of the temperature update relative to the real updates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetaOrder {
    AlphaFirst,
    Alg1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyOptimizer {
    /// RMSProp for meta-sac, Adam otherwise.
    Auto,
    Adam,
    RmsProp,
    Sgd,
}

fn parse_enum<E: Copy>(key: &str, value: &str, table: &[(&str, E)]) -> Result<E> {
    table
        .iter()
        .find(|(name, _)| *name == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = table.iter().map(|(n, _)| *n).collect();
            Error::Parse(format!("{key}: `{value}` is not one of {}", names.join(", ")))
        })
}

fn enum_name<E: Copy + PartialEq>(table: &[(&str, E)], value: E) -> Option<String> {
    table.iter().find(|(_, v)| *v == value).map(|(n, _)| n.to_string())
}

fn parse_num<N: FromStr>(key: &str, value: &str) -> Result<N> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{key}: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Parse(format!("{key}: expected on/off, got `{value}`"))),
    }
}

const META_STATES: &[(&str, MetaStates)] = &[("initial", MetaStates::Initial), ("arbitrary", MetaStates::Arbitrary)];
const META_Q: &[(&str, MetaQ)] = &[("soft", MetaQ::Soft), ("classic", MetaQ::Classic)];
const META_ORDER: &[(&str, MetaOrder)] = &[("alpha-first", MetaOrder::AlphaFirst), ("alg1", MetaOrder::Alg1)];
const POLICY_OPT: &[(&str, PolicyOptimizer)] = &[
    ("auto", PolicyOptimizer::Auto),
    ("adam", PolicyOptimizer::Adam),
    ("rmsprop", PolicyOptimizer::RmsProp),
    ("sgd", PolicyOptimizer::Sgd),
];
const ALPHA_OPT: &[(&str, bool)] = &[("sgd", false), ("adam", true)];
const RATE_MODES: &[(&str, RateMode)] = &[("mc", RateMode::MonteCarlo(crate::metrics::MC_SAMPLES)), ("gaussian", RateMode::Gaussian)];

/// Every setting of one training run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub env: String,
    pub algo: Algo,
    pub seed: u64,
    pub steps: usize,
    pub sac: SacHyper,
    pub hidden: usize,
    pub twin: bool,
    pub buffer_size: usize,
    pub eval_interval: usize,
    pub eval_rollouts: usize,
    /// Fixed temperature for sac-v1.
    pub alpha: f64,
    /// When set, sac-v1 decays exponentially from `alpha` to this value at
    /// the last update.
    pub alpha_end: Option<f64>,
    /// Starting temperature of the trainable tuners.
    pub init_alpha: f64,
    pub alpha_lr: f64,
    pub alpha_adam: bool,
    /// Dual-descent target; `None` means `-action_dim`.
    pub target_entropy: Option<f64>,
    pub meta_states: MetaStates,
    pub meta_q: MetaQ,
    pub resample: bool,
    pub meta_order: MetaOrder,
    pub d0_size: usize,
    pub policy_optimizer: PolicyOptimizer,
    pub rmsprop_decay: f64,
    /// Act with the policy instead of uniform actions before the start step.
    pub warmup_policy: bool,
    pub rate_mode: RateMode,
    /// Most recent replay states fed to the exploration metrics.
    pub metric_window: usize,
    pub knn_k: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            env: "pointmass".into(),
            algo: Algo::MetaSac,
            seed: 0,
            steps: 30_000,
            sac: SacHyper::default(),
            hidden: 256,
            twin: true,
            buffer_size: 1_000_000,
            eval_interval: 1000,
            eval_rollouts: 10,
            alpha: 0.2,
            alpha_end: None,
            init_alpha: 1.0,
            alpha_lr: DEFAULT_ALPHA_LR,
            alpha_adam: false,
            target_entropy: None,
            meta_states: MetaStates::Initial,
            meta_q: MetaQ::Soft,
            resample: true,
            meta_order: MetaOrder::AlphaFirst,
            d0_size: 256,
            policy_optimizer: PolicyOptimizer::Auto,
            rmsprop_decay: OptimizerKind::RMSPROP_DECAY,
            warmup_policy: false,
            rate_mode: RateMode::MonteCarlo(crate::metrics::MC_SAMPLES),
            metric_window: 2000,
            knn_k: DEFAULT_K,
            out: None,
        }
    }
}

/// Keys accepted by [`RunConfig::set`], in the order they are written out.
pub const CONFIG_KEYS: &[&str] = &[
    "env",
    "algo",
    "seed",
    "steps",
    "start_steps",
    "gamma",
    "tau",
    "batch",
    "lr_critic",
    "lr_policy",
    "hidden",
    "twin",
    "buffer_size",
    "eval_interval",
    "eval_rollouts",
    "alpha",
    "alpha_end",
    "init_alpha",
    "alpha_lr",
    "alpha_optimizer",
    "target_entropy",
    "meta_states",
    "meta_q",
    "resample",
    "meta_order",
    "d0_size",
    "policy_optimizer",
    "rmsprop_decay",
    "warmup_policy",
    "rate_mode",
    "metric_window",
    "knn_k",
    "out",
];

impl RunConfig {
    /// Sets one field from its text form. Dashes in `key` are read as
    /// underscores so flag spellings work too.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let k = key.as_str();
        let v = value.trim();
        match k {
            "env" => self.env = v.to_string(),
            "algo" => self.algo = v.parse()?,
            "seed" => self.seed = parse_num(k, v)?,
            "steps" => self.steps = parse_num(k, v)?,
            "start_steps" => self.sac.start_steps = parse_num(k, v)?,
            "gamma" => self.sac.gamma = parse_num(k, v)?,
            "tau" => self.sac.tau = parse_num(k, v)?,
            "batch" | "batch_size" => self.sac.batch_size = parse_num(k, v)?,
            "lr_critic" => self.sac.lr_critic = parse_num(k, v)?,
            "lr_policy" => self.sac.lr_policy = parse_num(k, v)?,
            "hidden" => self.hidden = parse_num(k, v)?,
            "twin" => self.twin = parse_bool(k, v)?,
            "buffer_size" => self.buffer_size = parse_num(k, v)?,
            "eval_interval" => self.eval_interval = parse_num(k, v)?,
            "eval_rollouts" => self.eval_rollouts = parse_num(k, v)?,
            "alpha" => self.alpha = parse_num(k, v)?,
            "alpha_end" => {
                self.alpha_end = match v {
                    "none" | "" => None,
                    _ => Some(parse_num(k, v)?),
                }
            }
            "init_alpha" => self.init_alpha = parse_num(k, v)?,
            "alpha_lr" => self.alpha_lr = parse_num(k, v)?,
            "alpha_optimizer" => self.alpha_adam = parse_enum(k, v, ALPHA_OPT)?,
            "target_entropy" => {
                self.target_entropy = match v {
                    "auto" | "" => None,
                    _ => Some(parse_num(k, v)?),
                }
            }
            "meta_states" => self.meta_states = parse_enum(k, v, META_STATES)?,
            "meta_q" => self.meta_q = parse_enum(k, v, META_Q)?,
            "resample" => self.resample = parse_bool(k, v)?,
            "meta_order" => self.meta_order = parse_enum(k, v, META_ORDER)?,
            "d0_size" => self.d0_size = parse_num(k, v)?,
            "policy_optimizer" => self.policy_optimizer = parse_enum(k, v, POLICY_OPT)?,
            "rmsprop_decay" => self.rmsprop_decay = parse_num(k, v)?,
            "warmup_policy" => self.warmup_policy = parse_bool(k, v)?,
            "rate_mode" => self.rate_mode = parse_enum(k, v, RATE_MODES)?,
            "metric_window" => self.metric_window = parse_num(k, v)?,
            "knn_k" => self.knn_k = parse_num(k, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", n + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Text form of one key, readable back by [`RunConfig::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "env" => self.env.clone(),
            "algo" => self.algo.name().to_string(),
            "seed" => self.seed.to_string(),
            "steps" => self.steps.to_string(),
            "start_steps" => self.sac.start_steps.to_string(),
            "gamma" => format!("{:?}", self.sac.gamma),
            "tau" => format!("{:?}", self.sac.tau),
            "batch" => self.sac.batch_size.to_string(),
            "lr_critic" => format!("{:?}", self.sac.lr_critic),
            "lr_policy" => format!("{:?}", self.sac.lr_policy),
            "hidden" => self.hidden.to_string(),
            "twin" => on_off(self.twin),
            "buffer_size" => self.buffer_size.to_string(),
            "eval_interval" => self.eval_interval.to_string(),
            "eval_rollouts" => self.eval_rollouts.to_string(),
            "alpha" => format!("{:?}", self.alpha),
            "alpha_end" => self.alpha_end.map_or("none".into(), |a| format!("{a:?}")),
            "init_alpha" => format!("{:?}", self.init_alpha),
            "alpha_lr" => format!("{:?}", self.alpha_lr),
            "alpha_optimizer" => (if self.alpha_adam { "adam" } else { "sgd" }).into(),
            "target_entropy" => self.target_entropy.map_or("auto".into(), |h| format!("{h:?}")),
            "meta_states" => enum_name(META_STATES, self.meta_states)?,
            "meta_q" => enum_name(META_Q, self.meta_q)?,
            "resample" => on_off(self.resample),
            "meta_order" => enum_name(META_ORDER, self.meta_order)?,
            "d0_size" => self.d0_size.to_string(),
            "policy_optimizer" => enum_name(POLICY_OPT, self.policy_optimizer)?,
            "rmsprop_decay" => format!("{:?}", self.rmsprop_decay),
            "warmup_policy" => on_off(self.warmup_policy),
            "rate_mode" => (if self.rate_mode == RateMode::Gaussian { "gaussian" } else { "mc" }).into(),
            "metric_window" => self.metric_window.to_string(),
            "knn_k" => self.knn_k.to_string(),
            "out" => self.out.as_ref()?.display().to_string(),
            _ => return None,
        })
    }

    /// Target entropy actually used for an action space of `action_dim`.
    pub fn target_entropy_for(&self, action_dim: usize) -> f64 {
        self.target_entropy.unwrap_or(-(action_dim as f64))
    }

    pub fn policy_optimizer_kind(&self) -> Result<OptimizerKind> {
        let rms = OptimizerKind::RmsProp {
            decay: self.rmsprop_decay,
            eps: OptimizerKind::RMSPROP_EPS,
        };
        Ok(match (self.policy_optimizer, self.algo) {
            (PolicyOptimizer::Auto, Algo::MetaSac) | (PolicyOptimizer::RmsProp, _) => rms,
            (PolicyOptimizer::Auto, _) | (PolicyOptimizer::Adam, _) => {
                if self.algo == Algo::MetaSac {
                    return Err(Error::Config(
                        "meta-sac needs an SGD or RMSProp policy optimizer".into(),
                    ));
                }
                OptimizerKind::adam()
            }
            (PolicyOptimizer::Sgd, _) => OptimizerKind::Sgd,
        })
    }

    /// Checks every constraint that does not need the environment.
    pub fn validate(&self) -> Result<()> {
        self.sac.validate()?;
        let fail = |msg: String| Err(Error::Config(msg));
        if self.steps < self.sac.start_steps {
            return fail(format!(
                "steps ({}) must be at least start_steps ({})",
                self.steps, self.sac.start_steps
            ));
        }
        if self.sac.start_steps < self.sac.batch_size {
            return fail(format!(
                "start_steps ({}) must be at least the batch size ({})",
                self.sac.start_steps, self.sac.batch_size
            ));
        }
        if self.eval_interval == 0 || self.eval_rollouts == 0 {
            return fail("eval interval and rollout count must be positive".into());
        }
        if self.hidden == 0 || self.buffer_size == 0 || self.d0_size == 0 {
            return fail("hidden width, buffer size and initial-state buffer size must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha {} must be positive", self.alpha));
        }
        if let Some(end) = self.alpha_end {
            if !(end > 0.0 && end.is_finite()) {
                return fail(format!("alpha_end {end} must be positive"));
            }
        }
        if !(self.init_alpha > 0.0 && self.init_alpha <= 1.0) {
            return fail(format!("init_alpha {} must lie in (0, 1]", self.init_alpha));
        }
        if !(self.alpha_lr > 0.0 && self.alpha_lr.is_finite()) {
            return fail("alpha_lr must be positive".into());
        }
        if let Some(h) = self.target_entropy {
            if !h.is_finite() {
                return fail("target_entropy must be finite".into());
            }
        }
        if !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0) {
            return fail(format!("rmsprop_decay {} must lie in (0, 1)", self.rmsprop_decay));
        }
        if self.knn_k == 0 {
            return fail("knn_k must be positive".into());
        }
        self.policy_optimizer_kind()?;
        crate::envs::make_env(&self.env)?;
        Ok(())
    }

    /// All keys as `key = value` lines, readable by [`RunConfig::apply_text`].
    pub fn to_text(&self) -> String {
        CONFIG_KEYS
            .iter()
            .filter_map(|k| self.get(k).map(|v| format!("{k} = {v}\n")))
            .collect()
    }
}

fn on_off(b: bool) -> String {
    (if b { "on" } else { "off" }).to_string()
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
