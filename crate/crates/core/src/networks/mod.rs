//! Squashed-Gaussian actor, single or twin Q critics, and Polyak targets.

pub mod checkpoint;
mod critic;
mod mlp;
mod policy;

pub use critic::{polyak_update, Critic, CriticSpec};
pub use mlp::MlpLayout;
pub use checkpoint::{decode_policy, encode_params, encode_policy, load_policy, save_policy};
pub use policy::{squashed_log_density, Policy, PolicySample, PolicySpec, LOG_STD_MAX, LOG_STD_MIN};
