use rand::Rng;

use crate::autodiff::{BoundParams, Graph, ParamSet, Shape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Layer widths of a fully connected network, input first, output last.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpLayout {
    dims: Vec<usize>,
}

impl MlpLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!("invalid layer layout {dims:?}")));
        }
        Ok(MlpLayout { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input(&self) -> usize {
        self.dims[0]
    }

    pub fn output(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    /// Uniform `±1/sqrt(fan_in)` weights and biases; the last layer is
    /// multiplied by `last_scale`.
    pub fn init<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R, last_scale: f64) -> ParamSet<T> {
        let mut params = ParamSet::new();
        for l in 0..self.n_layers() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let scale = if l + 1 == self.n_layers() { last_scale } else { 1.0 };
            let mut draw = |n: usize| -> Vec<T> {
                (0..n)
                    .map(|_| T::lit(scale * rng.gen_range(-bound..=bound)))
                    .collect()
            };
            let w = draw(fan_out * fan_in);
            let b = draw(fan_out);
            params.insert(
                format!("l{l}.w"),
                Tensor::new(Shape::matrix(fan_out, fan_in), w).expect("weight shape"),
            );
            params.insert(format!("l{l}.b"), Tensor::vector(b));
        }
        params
    }

    /// Checks that `params` chain through this layout.
    pub fn validate<T: Scalar>(&self, params: &ParamSet<T>) -> Result<()> {
        for l in 0..self.n_layers() {
            let w = params
                .get(&format!("l{l}.w"))
                .ok_or_else(|| Error::Structure(format!("missing l{l}.w")))?;
            let b = params
                .get(&format!("l{l}.b"))
                .ok_or_else(|| Error::Structure(format!("missing l{l}.b")))?;
            let expected = Shape::matrix(self.dims[l + 1], self.dims[l]);
            if w.shape() != &expected || b.numel() != self.dims[l + 1] {
                return Err(Error::Structure(format!(
                    "layer {l}: weight {} bias {} for layout {:?}",
                    w.shape(),
                    b.shape(),
                    self.dims
                )));
            }
        }
        Ok(())
    }

    /// Relu after every layer except the last, which stays linear unless
    /// `relu_last` is set.
    pub fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        params: &BoundParams,
        x: Var,
        relu_last: bool,
    ) -> Result<Var> {
        let mut h = x;
        for l in 0..self.n_layers() {
            let w = params.var(&format!("l{l}.w"));
            let b = params.var(&format!("l{l}.b"));
            h = g.affine(h, w, b)?;
            if l + 1 < self.n_layers() || relu_last {
                h = g.relu(h);
            }
        }
        Ok(h)
    }
}
