use std::collections::BTreeMap;

use crate::autodiff::graph::Var;
use crate::autodiff::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Named collection of parameter arrays, iterated in identifier order.
///
/// Also used for gradients, optimizer accumulators and sensitivities, which
/// all share the layout of the parameters they belong to.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamSet<T> {
    entries: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet {
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) {
        self.entries.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.entries.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalars across all entries.
    pub fn numel(&self) -> usize {
        self.entries.values().map(Tensor::numel).sum()
    }

    /// Entries whose name starts with `prefix`, with the prefix removed.
    pub fn with_prefix(&self, prefix: &str) -> ParamSet<T> {
        let mut out = ParamSet::new();
        for (k, v) in &self.entries {
            if let Some(rest) = k.strip_prefix(prefix) {
                out.insert(rest, v.clone());
            }
        }
        out
    }

    /// Copies every entry of `other` in under `prefix`.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &ParamSet<T>) {
        for (k, v) in other.iter() {
            self.insert(format!("{prefix}{k}"), v.clone());
        }
    }

    pub fn zeros_like(&self) -> Self {
        self.map(|_| T::zero())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v.map(&f)))
                .collect(),
        }
    }

    /// Errors unless `other` has the same names and shapes.
    pub fn check_same_structure(&self, other: &Self) -> Result<()> {
        if self.entries.len() != other.entries.len() {
            return Err(Error::Structure(format!(
                "{} entries vs {}",
                self.entries.len(),
                other.entries.len()
            )));
        }
        for ((ka, va), (kb, vb)) in self.entries.iter().zip(&other.entries) {
            if ka != kb {
                return Err(Error::Structure(format!("entry `{ka}` vs `{kb}`")));
            }
            if va.shape() != vb.shape() {
                return Err(Error::Structure(format!(
                    "entry `{ka}` has shape {} vs {}",
                    va.shape(),
                    vb.shape()
                )));
            }
        }
        Ok(())
    }

    /// Elementwise combination of two sets with identical structure.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_structure(other)?;
        let mut out = self.clone();
        for ((_, a), (_, b)) in out.entries.iter_mut().zip(&other.entries) {
            for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
                *x = f(*x, y);
            }
        }
        Ok(out)
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, c: T, other: &Self) -> Result<()> {
        *self = self.zip_map(other, |a, b| a + c * b)?;
        Ok(())
    }

    /// Flat inner product over all entries in identifier order.
    pub fn dot(&self, other: &Self) -> Result<T> {
        self.check_same_structure(other)?;
        Ok(self
            .entries
            .values()
            .zip(other.entries.values())
            .flat_map(|(a, b)| a.data().iter().zip(b.data()).map(|(&x, &y)| x * y))
            .sum())
    }

    pub fn norm(&self) -> T {
        self.entries
            .values()
            .flat_map(|t| t.data().iter().map(|&x| x * x))
            .sum::<T>()
            .sqrt()
    }

    /// All values concatenated in identifier order.
    pub fn flatten(&self) -> Vec<T> {
        self.entries
            .values()
            .flat_map(|t| t.data().iter().copied())
            .collect()
    }

    /// Same structure as `self`, values taken from `flat`.
    pub fn unflatten(&self, flat: &[T]) -> Result<Self> {
        if flat.len() != self.numel() {
            return Err(Error::Dim {
                what: "flat parameter vector",
                expected: self.numel(),
                got: flat.len(),
            });
        }
        let mut out = self.clone();
        let mut offset = 0;
        for t in out.entries.values_mut() {
            let n = t.numel();
            t.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(out)
    }

    pub fn all_finite(&self) -> bool {
        self.entries.values().all(Tensor::all_finite)
    }

    pub fn cast<U: Scalar>(&self) -> ParamSet<U> {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }

    /// Order-sensitive FNV-1a digest over names, shapes and value bits.
    pub fn fingerprint(&self) -> u64 {
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for &b in bytes {
                h ^= u64::from(b);
                h = h.wrapping_mul(PRIME);
            }
        };
        for (k, v) in &self.entries {
            feed(k.as_bytes());
            for d in v.shape().dims() {
                feed(&(*d as u64).to_le_bytes());
            }
            for x in v.data() {
                feed(&x.as_f64().to_bits().to_le_bytes());
            }
        }
        h
    }
}

/// Graph handles for a [`ParamSet`] registered with
/// [`Graph::bind`](crate::autodiff::Graph::bind).
#[derive(Clone, Debug, Default)]
pub struct BoundParams {
    vars: BTreeMap<String, Var>,
}

impl BoundParams {
    pub(crate) fn new(vars: BTreeMap<String, Var>) -> Self {
        BoundParams { vars }
    }

    /// Handle for `name`; panics on an unknown name, which is a wiring bug.
    pub fn var(&self, name: &str) -> Var {
        match self.vars.get(name) {
            Some(v) => *v,
            None => panic!("parameter `{name}` is not bound"),
        }
    }

    pub fn get(&self, name: &str) -> Option<Var> {
        self.vars.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn with_prefix(&self, prefix: &str) -> BoundParams {
        BoundParams {
            vars: self
                .vars
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(prefix).map(|r| (r.to_string(), *v)))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParamSet<f64> {
        let mut p = ParamSet::new();
        p.insert("b", Tensor::vector(vec![1.0, 2.0]));
        p.insert("a", Tensor::scalar(3.0));
        p
    }

    #[test]
    fn iteration_is_sorted() {
        let p = sample();
        assert_eq!(p.names().collect::<Vec<_>>(), vec!["a", "b"]);
        assert_eq!(p.flatten(), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn unflatten_restores_layout() {
        let p = sample();
        let q = p.unflatten(&[7.0, 8.0, 9.0]).unwrap();
        assert_eq!(q.get("b").unwrap().data(), &[8.0, 9.0]);
        assert!(p.unflatten(&[1.0]).is_err());
    }

    #[test]
    fn structure_mismatch_detected() {
        let p = sample();
        let mut q = sample();
        q.insert("c", Tensor::scalar(0.0));
        assert!(p.dot(&q).is_err());
        assert_eq!(p.dot(&p).unwrap(), 14.0);
    }

    #[test]
    fn fingerprint_tracks_values() {
        let p = sample();
        let mut q = sample();
        assert_eq!(p.fingerprint(), q.fingerprint());
        q.get_mut("a").unwrap().data_mut()[0] = 3.0000001;
        assert_ne!(p.fingerprint(), q.fingerprint());
    }
}
