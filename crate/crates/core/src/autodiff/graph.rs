//! Dynamic reverse-mode differentiation over dense tensors.
//!
//! A [`Graph`] is an append-only arena of nodes. Every operation pushes a
//! node whose parents already exist, so node order is a topological order and
//! the backward sweep is a single reverse pass over the arena.

use crate::autodiff::params::{BoundParams, ParamSet};
use crate::autodiff::tensor::{Shape, Tensor};
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, softplus, Scalar};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Constant,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Minimum(Var, Var),
    Neg(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Sqrt(Var),
    Relu(Var),
    Softplus(Var),
    Clamp(Var, T, T),
    Scale(Var, T),
    Shift(Var, T),
    Affine { x: Var, w: Var, b: Var },
    Sum(Var),
    Mean(Var),
    SumCols(Var),
    Concat(Vec<Var>),
}

#[derive(Clone, Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    tracked: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Adjoints produced by one backward sweep.
#[derive(Clone, Debug)]
pub struct Adjoints<T> {
    slots: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Adjoints<T> {
    /// Adjoint of `v`, zero when `v` does not influence the root.
    pub fn of(&self, v: Var, graph: &Graph<T>) -> Tensor<T> {
        match self.slots.get(v.0).and_then(|s| s.as_ref()) {
            Some(t) => t.clone(),
            None => Tensor::zeros(graph.value(v).shape().clone()),
        }
    }
}

fn broadcast(op: &'static str, a: &Shape, b: &Shape) -> Result<Shape> {
    if a == b {
        Ok(a.clone())
    } else if a.numel() == 1 {
        Ok(b.clone())
    } else if b.numel() == 1 {
        Ok(a.clone())
    } else {
        Err(Error::ShapeMismatch {
            op,
            lhs: a.clone(),
            rhs: b.clone(),
        })
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (mut s0, mut s1, mut s2, mut s3) = (T::zero(), T::zero(), T::zero(), T::zero());
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for i in 4 * chunks..n {
        s += a[i] * b[i];
    }
    s
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Adds `f(i)` for every output element `i` into the adjoint slot of a
/// parent, summing when the parent was broadcast from a single element.
fn accumulate<T: Scalar>(
    slot: &mut Option<Tensor<T>>,
    shape: &Shape,
    n_out: usize,
    f: impl Fn(usize) -> T,
) {
    let t = slot.get_or_insert_with(|| Tensor::zeros(shape.clone()));
    let d = t.data_mut();
    if d.len() == n_out {
        for (i, di) in d.iter_mut().enumerate() {
            *di += f(i);
        }
    } else {
        let s: T = (0..n_out).map(f).sum();
        d[0] += s;
    }
}

#[inline]
fn bidx(len: usize, i: usize) -> usize {
    if len == 1 {
        0
    } else {
        i
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &Shape {
        self.nodes[v.0].value.shape()
    }

    /// Scalar value of a one-element node.
    pub fn item(&self, v: Var) -> T {
        self.value(v).item()
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// An input that backward treats as fixed.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn scalar(&mut self, value: T) -> Var {
        self.constant(Tensor::scalar(value))
    }

    /// Same data as `v`, cut from the graph.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    /// Registers every parameter of `params` as a differentiable leaf.
    pub fn bind(&mut self, params: &ParamSet<T>) -> BoundParams {
        let vars = params
            .iter()
            .map(|(name, t)| (name.to_string(), self.leaf(t.clone())))
            .collect();
        BoundParams::new(vars)
    }

    /// Registers every parameter of `params` as a constant.
    pub fn bind_constant(&mut self, params: &ParamSet<T>) -> BoundParams {
        let vars = params
            .iter()
            .map(|(name, t)| (name.to_string(), self.constant(t.clone())))
            .collect();
        BoundParams::new(vars)
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
        op: Op<T>,
    ) -> Result<Var> {
        let shape = broadcast(name, self.shape(a), self.shape(b))?;
        let (va, vb) = (self.value(a).data(), self.value(b).data());
        let n = shape.numel();
        let data = (0..n)
            .map(|i| f(va[bidx(va.len(), i)], vb[bidx(vb.len(), i)]))
            .collect();
        let tracked = self.tracked(a) || self.tracked(b);
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, op, tracked))
    }

    fn unary(&mut self, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let value = self.value(a).map(f);
        let tracked = self.tracked(a);
        self.push(value, op, tracked)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("minimum", a, b, |x, y| if y < x { y } else { x }, Op::Minimum(a, b))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(a, |x| -x, Op::Neg(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.tanh(), Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.exp(), Op::Exp(a))
    }

    fn check_positive(&self, op: &'static str, a: Var) -> Result<()> {
        match self.value(a).data().iter().find(|&&x| !(x > T::zero())) {
            Some(&x) => Err(Error::Domain { op, value: x.as_f64() }),
            None => Ok(()),
        }
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.check_positive("log", a)?;
        Ok(self.unary(a, |x| x.ln(), Op::Log(a)))
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.check_positive("sqrt", a)?;
        Ok(self.unary(a, |x| x.sqrt(), Op::Sqrt(a)))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, Op::Square(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(T::zero()), Op::Relu(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, softplus, Op::Softplus(a))
    }

    /// Clamps into `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&mut self, a: Var, lo: T, hi: T) -> Var {
        self.unary(a, |x| x.max(lo).min(hi), Op::Clamp(a, lo, hi))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        self.unary(a, |x| x * c, Op::Scale(a, c))
    }

    pub fn shift(&mut self, a: Var, c: T) -> Var {
        self.unary(a, |x| x + c, Op::Shift(a, c))
    }

    /// `x W^T + b` with `x: [n, in]` (or `[in]`), `W: [out, in]`, `b: [out]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        let (n, k) = xs.as_matrix();
        if ws.rank() != 2 || ws.dims()[1] != k {
            return Err(Error::ShapeMismatch {
                op: "affine",
                lhs: xs.clone(),
                rhs: ws.clone(),
            });
        }
        let m = ws.dims()[0];
        if bs.numel() != m {
            return Err(Error::ShapeMismatch {
                op: "affine",
                lhs: ws.clone(),
                rhs: bs.clone(),
            });
        }
        let out_shape = if xs.rank() <= 1 {
            Shape::vector(m)
        } else {
            Shape::matrix(n, m)
        };
        let (xv, wv, bv) = (self.value(x).data(), self.value(w).data(), self.value(b).data());
        let mut out = Vec::with_capacity(n * m);
        for i in 0..n {
            let xi = &xv[i * k..(i + 1) * k];
            for o in 0..m {
                out.push(bv[o] + dot(xi, &wv[o * k..(o + 1) * k]));
            }
        }
        let tracked = self.tracked(x) || self.tracked(w) || self.tracked(b);
        let value = Tensor::new(out_shape, out)?;
        Ok(self.push(value, Op::Affine { x, w, b }, tracked))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s: T = self.value(a).data().iter().copied().sum();
        let tracked = self.tracked(a);
        self.push(Tensor::scalar(s), Op::Sum(a), tracked)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s: T = v.data().iter().copied().sum();
        let n = T::lit(v.numel() as f64);
        let tracked = self.tracked(a);
        self.push(Tensor::scalar(s / n), Op::Mean(a), tracked)
    }

    /// Row sums: `[n, d] -> [n, 1]`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let (n, d) = v.shape().as_matrix();
        let data = (0..n).map(|i| v.data()[i * d..(i + 1) * d].iter().copied().sum()).collect();
        let value = Tensor::new(Shape::matrix(n, 1), data).expect("row sums");
        let tracked = self.tracked(a);
        self.push(value, Op::SumCols(a), tracked)
    }

    /// Concatenation along the last axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Empty("concat"))?;
        let rows = self.shape(first).as_matrix().0;
        let rank = self.shape(first).rank().max(1);
        let mut width = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.as_matrix().0 != rows || s.rank().max(1) != rank {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    lhs: self.shape(first).clone(),
                    rhs: s.clone(),
                });
            }
            width += s.as_matrix().1;
        }
        let mut data = Vec::with_capacity(rows * width);
        for i in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        let shape = if rank == 1 {
            Shape::vector(width)
        } else {
            Shape::matrix(rows, width)
        };
        let tracked = parts.iter().any(|&p| self.tracked(p));
        let value = Tensor::new(shape, data)?;
        Ok(self.push(value, Op::Concat(parts.to_vec()), tracked))
    }

    /// Reverse sweep from a scalar `root`. Each call starts from fresh
    /// adjoints, so repeated sweeps over one graph agree exactly.
    pub fn backward(&self, root: Var) -> Result<Adjoints<T>> {
        let root_shape = self.shape(root);
        if root_shape.numel() != 1 {
            return Err(Error::NonScalarRoot(root_shape.clone()));
        }
        let mut adj: Vec<Option<Tensor<T>>> = vec![None; root.0 + 1];
        adj[root.0] = Some(Tensor::full(root_shape.clone(), T::one()));

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            self.propagate(node, &g, &mut adj);
            adj[idx] = Some(g);
        }
        Ok(Adjoints { slots: adj })
    }

    /// Gradient of `root` with respect to every bound parameter, keyed by
    /// parameter name. Parameters the root does not depend on get zeros.
    pub fn gradients(&self, root: Var, params: &BoundParams) -> Result<ParamSet<T>> {
        let adj = self.backward(root)?;
        let mut out = ParamSet::new();
        for (name, v) in params.iter() {
            out.insert(name, adj.of(v, self));
        }
        Ok(out)
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, adj: &mut [Option<Tensor<T>>]) {
        let gd = g.data();
        let n = gd.len();
        let out = node.value.data();
        let val = |v: Var| self.nodes[v.0].value.data();
        let want = |v: Var| self.nodes[v.0].tracked;
        let shape = |v: Var| self.nodes[v.0].value.shape();

        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::Add(a, b) => {
                if want(*a) {
                    accumulate(&mut adj[a.0], shape(*a), n, |i| gd[i]);
                }
                if want(*b) {
                    accumulate(&mut adj[b.0], shape(*b), n, |i| gd[i]);
                }
            }
            Op::Sub(a, b) => {
                if want(*a) {
                    accumulate(&mut adj[a.0], shape(*a), n, |i| gd[i]);
                }
                if want(*b) {
                    accumulate(&mut adj[b.0], shape(*b), n, |i| -gd[i]);
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                if want(*a) {
                    accumulate(&mut adj[a.0], shape(*a), n, |i| gd[i] * vb[bidx(vb.len(), i)]);
                }
                if want(*b) {
                    accumulate(&mut adj[b.0], shape(*b), n, |i| gd[i] * va[bidx(va.len(), i)]);
                }
            }
            Op::Div(a, b) => {
                let vb = val(*b);
                if want(*a) {
                    accumulate(&mut adj[a.0], shape(*a), n, |i| gd[i] / vb[bidx(vb.len(), i)]);
                }
                if want(*b) {
                    accumulate(&mut adj[b.0], shape(*b), n, |i| {
                        -gd[i] * out[i] / vb[bidx(vb.len(), i)]
                    });
                }
            }
            Op::Minimum(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                let picks_b = |i: usize| vb[bidx(vb.len(), i)] < va[bidx(va.len(), i)];
                if want(*a) {
                    accumulate(&mut adj[a.0], shape(*a), n, |i| {
                        if picks_b(i) {
                            T::zero()
                        } else {
                            gd[i]
                        }
                    });
                }
                if want(*b) {
                    accumulate(&mut adj[b.0], shape(*b), n, |i| {
                        if picks_b(i) {
                            gd[i]
                        } else {
                            T::zero()
                        }
                    });
                }
            }
            Op::Neg(a) => accumulate(&mut adj[a.0], shape(*a), n, |i| -gd[i]),
            Op::Tanh(a) => {
                accumulate(&mut adj[a.0], shape(*a), n, |i| gd[i] * (T::one() - out[i] * out[i]))
            }
            Op::Exp(a) => accumulate(&mut adj[a.0], shape(*a), n, |i| gd[i] * out[i]),
            Op::Log(a) => {
                let va = val(*a);
                accumulate(&mut adj[a.0], shape(*a), n, |i| gd[i] / va[i])
            }
            Op::Square(a) => {
                let va = val(*a);
                let two = T::lit(2.0);
                accumulate(&mut adj[a.0], shape(*a), n, |i| gd[i] * two * va[i])
            }
            Op::Sqrt(a) => {
                let half = T::lit(0.5);
                accumulate(&mut adj[a.0], shape(*a), n, |i| gd[i] * half / out[i])
            }
            Op::Relu(a) => {
                let va = val(*a);
                accumulate(&mut adj[a.0], shape(*a), n, |i| {
                    if va[i] > T::zero() {
                        gd[i]
                    } else {
                        T::zero()
                    }
                })
            }
            Op::Softplus(a) => {
                let va = val(*a);
                accumulate(&mut adj[a.0], shape(*a), n, |i| gd[i] * sigmoid(va[i]))
            }
            Op::Clamp(a, lo, hi) => {
                let va = val(*a);
                accumulate(&mut adj[a.0], shape(*a), n, |i| {
                    if va[i] >= *lo && va[i] <= *hi {
                        gd[i]
                    } else {
                        T::zero()
                    }
                })
            }
            Op::Scale(a, c) => accumulate(&mut adj[a.0], shape(*a), n, |i| gd[i] * *c),
            Op::Shift(a, _) => accumulate(&mut adj[a.0], shape(*a), n, |i| gd[i]),
            Op::Affine { x, w, b } => self.affine_backward(*x, *w, *b, g, adj),
            Op::Sum(a) => {
                let g0 = gd[0];
                let m = shape(*a).numel();
                accumulate(&mut adj[a.0], shape(*a), m, |_| g0)
            }
            Op::Mean(a) => {
                let m = shape(*a).numel();
                let g0 = gd[0] / T::lit(m as f64);
                accumulate(&mut adj[a.0], shape(*a), m, |_| g0)
            }
            Op::SumCols(a) => {
                let (_, d) = shape(*a).as_matrix();
                let m = shape(*a).numel();
                accumulate(&mut adj[a.0], shape(*a), m, |i| gd[i / d])
            }
            Op::Concat(parts) => {
                let width = node.value.cols();
                let mut offset = 0;
                for p in parts {
                    let pc = shape(*p).as_matrix().1;
                    if want(*p) {
                        let m = shape(*p).numel();
                        accumulate(&mut adj[p.0], shape(*p), m, |j| {
                            let (r, c) = (j / pc, j % pc);
                            gd[r * width + offset + c]
                        });
                    }
                    offset += pc;
                }
            }
        }
    }

    fn affine_backward(&self, x: Var, w: Var, b: Var, g: &Tensor<T>, adj: &mut [Option<Tensor<T>>]) {
        let (n, k) = self.shape(x).as_matrix();
        let m = self.shape(w).dims()[0];
        let gd = g.data();
        let xv = self.value(x).data();
        let wv = self.value(w).data();

        if self.tracked(x) {
            let t = adj[x.0].get_or_insert_with(|| Tensor::zeros(self.shape(x).clone()));
            let dx = t.data_mut();
            for i in 0..n {
                let dxi = &mut dx[i * k..(i + 1) * k];
                for o in 0..m {
                    let go = gd[i * m + o];
                    if go != T::zero() {
                        axpy(go, &wv[o * k..(o + 1) * k], dxi);
                    }
                }
            }
        }
        if self.tracked(w) {
            let t = adj[w.0].get_or_insert_with(|| Tensor::zeros(self.shape(w).clone()));
            let dw = t.data_mut();
            for i in 0..n {
                let xi = &xv[i * k..(i + 1) * k];
                for o in 0..m {
                    let go = gd[i * m + o];
                    if go != T::zero() {
                        axpy(go, xi, &mut dw[o * k..(o + 1) * k]);
                    }
                }
            }
        }
        if self.tracked(b) {
            let t = adj[b.0].get_or_insert_with(|| Tensor::zeros(self.shape(b).clone()));
            let db = t.data_mut();
            for i in 0..n {
                for o in 0..m {
                    db[o] += gd[i * m + o];
                }
            }
        }
    }
}
