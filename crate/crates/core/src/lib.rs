//! Soft actor-critic with three entropy-temperature strategies: a fixed
//! (optionally decaying) temperature, dual gradient descent against a target
//! entropy, and a metagradient that differentiates an evaluation-aligned meta
//! loss through one RMSProp policy step.
//!
//! Numerical code is generic over [`Scalar`]; the aliases at the crate root
//! fix it to `f64`, which is what training and every gradient check use.

pub mod alpha;
pub mod autodiff;
pub mod buffers;
pub mod envs;
pub mod metagrad;
pub mod metrics;
pub mod error;
pub mod harness;
pub mod networks;
pub mod sac;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Concrete double-precision aliases used by training and the CLI.
pub type Tensor = autodiff::Tensor<f64>;
pub type ParamSet = autodiff::ParamSet<f64>;
pub type Graph = autodiff::Graph<f64>;
pub type Policy = networks::Policy<f64>;
pub type Critic = networks::Critic<f64>;
pub type ReplayBuffer = buffers::ReplayBuffer<f64>;
pub type Optimizer = sac::Optimizer<f64>;
