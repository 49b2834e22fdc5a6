//! Minimal dense-tensor reverse-mode differentiation.

mod graph;
mod params;
mod tensor;

pub use graph::{Adjoints, Graph, Var};
pub use params::{BoundParams, ParamSet};
pub use tensor::{Shape, Tensor};
